"""Command-line surface: synth, profile, logit-align, train, score, eval,
gradcheck.

Every command is deterministic given --seed. Diagnostics go to stderr; exit
code 0 on success, 1 on data errors, 2 on usage errors. JSON artifacts embed
{tool_version, seed, config_hash} for exact replay.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import __version__
from .align import (
    NessaConfig,
    PairedData,
    load_checkpoint,
    loss_m1,
    loss_m2,
    loss_m3,
    map_profiles,
    map_runtime,
    sample_negative_bank,
    save_checkpoint,
    save_training_log,
    train,
    transform_profiles_offline,
)
from .data import (
    build_all_profiles,
    load_embeddings,
    load_profiles,
    load_trials,
    save_embeddings,
    save_profiles,
    save_scores,
    save_trials,
)
from .errors import SidAlignError
from .logit import (
    build_weight_matrix,
    compute_fusion_transform,
    load_fusion,
    logit_score_fused_batch,
    save_fusion,
)
from .metrics import cosine_scorer, evaluate, far_key, save_report, score_trials
from .mlp import gradient_check, mlp_init
from .numerics import Prng
from .synth import SynthConfig, generate, make_trials

SCORERS = (
    "cosine-sym-x",
    "cosine-sym-y",
    "cosine-asym-raw",
    "logit-fused",
    "nessa-m1",
    "nessa-m2",
    "nessa-m3",
)


_PATH_ARGS = frozenset({
    "func", "config", "out", "out_x", "out_y", "trials_out", "embeddings",
    "profiles_x", "profiles_y", "corpus_x", "corpus_y", "trials", "fusion",
    "checkpoint", "log", "scores", "baseline_report", "candidate_report",
})


def _config_hash(args: argparse.Namespace) -> str:
    """Hash of the behavioral settings only; file locations are excluded so
    the same logical run yields identical artifacts anywhere on disk."""
    payload = {k: v for k, v in sorted(vars(args).items()) if k not in _PATH_ARGS}
    blob = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _provenance(args) -> dict:
    return {
        "tool_version": __version__,
        "seed": getattr(args, "seed", None),
        "config_hash": _config_hash(args),
    }


# ---------------------------------------------------------------------------
# Commands


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_speakers=args.n_speakers,
        n_enroll_utts=args.n_enroll,
        n_runtime_utts=args.n_runtime,
        latent_dim=args.latent_dim,
        embed_dim=args.embed_dim,
        within_noise_x=args.noise_x,
        within_noise_y=args.noise_y,
        distortion_x=args.distortion_x,
        distortion_y=args.distortion_y,
        nonlinear_gain=args.nonlinear_gain,
        seed=args.seed,
        model_seed=args.model_seed,
    )
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
        for key, value in overrides.items():
            if not hasattr(cfg, key):
                raise SidAlignError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
    corpus_x, corpus_y, _ = generate(cfg)
    save_embeddings(corpus_x, args.out_x)
    save_embeddings(corpus_y, args.out_y)
    if args.trials_out:
        trials = make_trials(corpus_y, args.n_target, args.n_imposter,
                             args.trial_seed if args.trial_seed is not None else cfg.seed)
        save_trials(trials, args.trials_out)
    print(f"wrote {len(corpus_x.records)} records per view", file=sys.stderr)
    return 0


def cmd_profile(args) -> int:
    corpus = load_embeddings(args.embeddings)
    model_id = args.model_id or corpus.model_ids[0]
    profiles = build_all_profiles(corpus, model_id)
    save_profiles(profiles, args.out)
    print(f"wrote {len(profiles)} profiles", file=sys.stderr)
    return 0


def cmd_logit_align(args) -> int:
    profiles_x = load_profiles(args.profiles_x)
    profiles_y = load_profiles(args.profiles_y)
    have_y = {p.speaker_id for p in profiles_y}
    shared = [p.speaker_id for p in profiles_x if p.speaker_id in have_y]
    if args.n_speakers and args.n_speakers < len(shared):
        prng = Prng(args.seed)
        picks = sorted(prng.choice(len(shared), args.n_speakers, replace=False))
        shared = [shared[int(i)] for i in picks]
    w_x = build_weight_matrix(profiles_x, shared)
    w_y = build_weight_matrix(profiles_y, shared)
    fusion = compute_fusion_transform(w_x, w_y)
    save_fusion(fusion, args.out, extra=_provenance(args))
    print(f"fusion transform: N={fusion.n_speakers} d={fusion.d} "
          f"jitter={fusion.jitter_applied:g}", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    corpus_x = load_embeddings(args.corpus_x)
    corpus_y = load_embeddings(args.corpus_y)
    corpus_x = _with_profiles(corpus_x)
    corpus_y = _with_profiles(corpus_y)

    all_speakers = [s for s in corpus_x.speaker_ids()
                    if s in set(corpus_y.speaker_ids())]
    n_val = int(round(args.val_fraction * len(all_speakers)))
    prng = Prng(args.seed + 7)
    order = prng.permutation(len(all_speakers))
    val_ids = [all_speakers[int(i)] for i in order[:n_val]]
    train_ids = [all_speakers[int(i)] for i in order[n_val:]]

    train_pair = PairedData(corpus_x, corpus_y, train_ids)
    val_pair = PairedData(corpus_x, corpus_y, val_ids) if val_ids else None

    cfg = NessaConfig(
        variant=args.variant,
        alpha=args.alpha,
        beta=args.beta,
        gamma=args.gamma,
        w_init=args.w_init,
        epochs=args.epochs,
        steps_per_epoch=args.steps,
        batch_size=args.batch,
        bank_size=args.bank_size,
        hidden=args.hidden,
        lr0=args.lr,
        lr_decay=args.decay,
        seed=args.seed,
    )
    ckpt = train(cfg, train_pair, val_pair)
    save_checkpoint(ckpt, args.out, extra=_provenance(args))
    if args.log:
        save_training_log(ckpt.log, args.log)
    for entry in ckpt.log:
        print(f"epoch {entry['epoch']}: train {entry['train_loss']:.6g} "
              f"val {entry['val_loss']:.6g}", file=sys.stderr)
    return 0


def _with_profiles(corpus):
    from .data import Corpus

    profiles = build_all_profiles(corpus, corpus.model_ids[0])
    return Corpus(corpus.records, profiles)


def cmd_score(args) -> int:
    corpus_x = load_embeddings(args.corpus_x)
    corpus_y = load_embeddings(args.corpus_y)
    trials = load_trials(args.trials)
    model_x = corpus_x.model_ids[0]
    model_y = corpus_y.model_ids[0]
    prof_x = {p.speaker_id: p.vector for p in build_all_profiles(corpus_x, model_x)}
    prof_y = {p.speaker_id: p.vector for p in build_all_profiles(corpus_y, model_y)}
    run_x = {r.utterance_id: r.vector for r in corpus_x.records if r.split == "runtime"}
    run_y = {r.utterance_id: r.vector for r in corpus_y.records if r.split == "runtime"}

    scorer_id = args.scorer
    if scorer_id == "cosine-sym-x":
        scored = score_trials(trials, cosine_scorer, prof_x, run_x)
    elif scorer_id == "cosine-sym-y":
        scored = score_trials(trials, cosine_scorer, prof_y, run_y)
    elif scorer_id == "cosine-asym-raw":
        scored = score_trials(trials, cosine_scorer, prof_x, run_y)
    elif scorer_id == "logit-fused":
        if not args.fusion:
            raise SidAlignError("--fusion is required for the logit-fused scorer")
        fusion = load_fusion(args.fusion)
        scored = score_trials(
            trials, lambda p, r: logit_score_fused_batch(p, r, fusion),
            prof_x, run_y)
    elif scorer_id in ("nessa-m1", "nessa-m2", "nessa-m3"):
        if not args.checkpoint:
            raise SidAlignError("--checkpoint is required for aligner scorers")
        ckpt = load_checkpoint(args.checkpoint)
        expected = scorer_id.split("-")[1]
        if ckpt.variant != expected:
            raise SidAlignError(
                f"checkpoint variant {ckpt.variant!r} does not match {scorer_id}")
        if ckpt.variant == "m1":
            run_m = {k: map_runtime(ckpt, v) for k, v in run_y.items()}
            scored = score_trials(trials, cosine_scorer, prof_x, run_m)
        elif ckpt.variant == "m2":
            prof_m = _map_dict(prof_x, lambda m: map_profiles(ckpt, m))
            scored = score_trials(trials, cosine_scorer, prof_m, run_y)
        else:
            prof_m = _map_dict(prof_x, lambda m: map_profiles(ckpt, m))
            run_m = _map_dict(run_y, lambda m: map_runtime(ckpt, m))
            scored = score_trials(trials, cosine_scorer, prof_m, run_m)
    else:
        raise SidAlignError(f"unknown scorer {scorer_id!r}")
    save_scores(scored, args.out)
    print(f"scored {len(scored.trials)} trials with {scorer_id}", file=sys.stderr)
    return 0


def _map_dict(vectors: dict, fn) -> dict:
    keys = list(vectors)
    mat = np.stack([vectors[k] for k in keys])
    mapped = fn(mat)
    return {k: mapped[i] for i, k in enumerate(keys)}


def cmd_eval(args) -> int:
    trials = load_trials(args.scores)
    far_targets = [float(x) for x in args.far.split(",")]
    baseline_frrs = None
    candidate_impacts = None
    if args.baseline_report:
        base = json.load(open(args.baseline_report, encoding="utf-8"))
        baseline_frrs = {far_key(e["target_far"]): e["frr"] for e in base["per_far"]}
    if args.candidate_report:
        cand = json.load(open(args.candidate_report, encoding="utf-8"))
        candidate_impacts = {
            far_key(e["target_far"]): e["relative_impact"]
            for e in cand["per_far"] if "relative_impact" in e
        }
    report = evaluate(trials, args.scorer_id, far_targets,
                      baseline_frrs, candidate_impacts)
    report.update(_provenance(args))
    save_report(report, args.out)
    if args.stdout:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        print()
    print(f"eer {report['eer']:.4f}", file=sys.stderr)
    return 0


def cmd_gradcheck(args) -> int:
    from .align import NegativeBank, PairBatch

    d, h, n = args.dim, args.hidden, args.batch
    prng = Prng(args.seed)
    tol = args.tolerance
    failures = []
    for name in ("m1", "m2", "m3"):
        f1 = mlp_init([d, h, h, d], args.seed)
        f2 = mlp_init([d, h, h, d], args.seed + 1)
        batch = PairBatch(
            [f"b{i}" for i in range(n)],
            *(_unit_rows(prng, n, d) for _ in range(4)),
        )
        bank = NegativeBank(["z0", "z1"], _unit_rows(prng, 2, d),
                            _unit_rows(prng, 2, d))
        if name == "m1":
            params = f1.parameters()
            _, grads = loss_m1(f1, batch)
            err = gradient_check(params, lambda: loss_m1(f1, batch)[0], grads,
                                 seed=args.seed)
        elif name == "m2":
            params = f1.parameters()
            _, grads = loss_m2(f1, batch)
            err = gradient_check(params, lambda: loss_m2(f1, batch)[0], grads,
                                 seed=args.seed)
        else:
            w = np.array([5.0])
            params = f1.parameters() + f2.parameters() + [w]
            _, g1, g2, dw = loss_m3(f1, f2, float(w[0]), batch, bank,
                                    1.0, 0.5, 0.1)
            grads = g1 + g2 + [np.array([dw])]
            err = gradient_check(
                params,
                lambda: loss_m3(f1, f2, float(w[0]), batch, bank,
                                1.0, 0.5, 0.1, want_grads=False)[0],
                grads, seed=args.seed)
        status = "ok" if err <= tol else "FAIL"
        print(f"loss {name}: max relative error {err:.3g} [{status}]",
              file=sys.stderr)
        if err > tol:
            failures.append(name)
    return 1 if failures else 0


def _unit_rows(prng: Prng, n: int, d: int) -> np.ndarray:
    rows = prng.standard_normal(n, d)
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sidalign")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a paired synthetic corpus")
    p.add_argument("--config", help="JSON config file; flags override")
    p.add_argument("--n-speakers", type=int, default=200)
    p.add_argument("--n-enroll", type=int, default=5)
    p.add_argument("--n-runtime", type=int, default=3)
    p.add_argument("--latent-dim", type=int, default=16)
    p.add_argument("--embed-dim", type=int, default=16)
    p.add_argument("--noise-x", type=float, default=0.3)
    p.add_argument("--noise-y", type=float, default=0.15)
    p.add_argument("--distortion-x", default="orthogonal")
    p.add_argument("--distortion-y", default="orthogonal")
    p.add_argument("--nonlinear-gain", type=float, default=1.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-seed", type=int,
                   help="seed for the distortion maps (defaults to --seed)")
    p.add_argument("--out-x", required=True)
    p.add_argument("--out-y", required=True)
    p.add_argument("--trials-out")
    p.add_argument("--n-target", type=int, default=500)
    p.add_argument("--n-imposter", type=int, default=500)
    p.add_argument("--trial-seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("profile", help="build voice profiles from a corpus")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--model-id")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("logit-align", help="build the fused logit transform")
    p.add_argument("--profiles-x", required=True)
    p.add_argument("--profiles-y", required=True)
    p.add_argument("--n-speakers", type=int, default=0,
                   help="subsample this many shared speakers (0 = all)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_logit_align)

    p = sub.add_parser("train", help="train an embedding space aligner")
    p.add_argument("--corpus-x", required=True)
    p.add_argument("--corpus-y", required=True)
    p.add_argument("--variant", choices=("m1", "m2", "m3"), required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--w-init", type=float, default=5.0)
    p.add_argument("--bank-size", type=int, default=0)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--batch", type=int, default=1024)
    p.add_argument("--hidden", type=int, default=800)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--decay", type=float, default=0.96)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--log")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a trial list")
    p.add_argument("--scorer", choices=SCORERS, required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--corpus-x", required=True)
    p.add_argument("--corpus-y", required=True)
    p.add_argument("--fusion")
    p.add_argument("--checkpoint")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="compute EER and FRR@FAR report")
    p.add_argument("--scores", required=True)
    p.add_argument("--scorer-id", default="system")
    p.add_argument("--far", default="0.125,0.05,0.02")
    p.add_argument("--baseline-report")
    p.add_argument("--candidate-report")
    p.add_argument("--stdout", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of all losses")
    p.add_argument("--dim", type=int, default=6)
    p.add_argument("--hidden", type=int, default=10)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SidAlignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
