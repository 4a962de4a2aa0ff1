"""Verification metrics: ROC sweep, FRR at fixed FAR, EER, relative impact.

Accept rule is ``score >= threshold``; ties count as accepts for both error
types. The ROC is the exact empirical curve over the unique scores plus a
+inf threshold, so the (FAR=1, FRR=0) and (FAR=0, FRR=1) endpoints are always
present.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import TrialSet, format_float
from .errors import (
    BaselineZero,
    DegenerateGap,
    DegenerateTrialSet,
    UnknownId,
)

DEFAULT_FAR_TARGETS = (0.125, 0.05, 0.02)


@dataclass
class RocCurve:
    thresholds: np.ndarray  # increasing; last entry is +inf
    far: np.ndarray  # non-increasing along thresholds
    frr: np.ndarray  # non-decreasing along thresholds
    n_target: int
    n_imposter: int


def roc(scores, labels) -> RocCurve:
    """Exact empirical FAR/FRR sweep; labels are 1 = target, 0 = imposter."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    tar = scores[labels == 1]
    imp = scores[labels == 0]
    if len(tar) == 0 or len(imp) == 0:
        raise DegenerateTrialSet("need at least one target and one imposter trial")
    thresholds = np.concatenate([np.unique(scores), [np.inf]])
    # accept iff score >= threshold
    far = np.array([np.count_nonzero(imp >= t) for t in thresholds]) / len(imp)
    frr = np.array([np.count_nonzero(tar < t) for t in thresholds]) / len(tar)
    return RocCurve(thresholds, far, frr, len(tar), len(imp))


def frr_at_far(curve: RocCurve, target_far: float) -> tuple[float, float]:
    """Lowest FRR achievable at an operating threshold with FAR <= target.

    Returns (frr, threshold). No interpolation: the reported FRR is realized
    at the returned threshold.
    """
    if not (0 < target_far < 1):
        raise DegenerateTrialSet(f"target FAR must be in (0, 1), got {target_far}")
    ok = curve.far <= target_far
    idx = np.nonzero(ok)[0]
    best = idx[np.argmin(curve.frr[idx])]
    return float(curve.frr[best]), float(curve.thresholds[best])


def eer(curve: RocCurve) -> float:
    """FAR = FRR crossing with linear interpolation between curve points."""
    diff = curve.far - curve.frr
    # diff starts >= 0 (FAR=1, FRR=0) and ends <= 0 (FAR=0, FRR=1).
    for i in range(len(diff) - 1):
        d0, d1 = diff[i], diff[i + 1]
        if d0 == 0:
            return float(curve.far[i])
        if d0 > 0 >= d1:
            t = d0 / (d0 - d1)
            return float(curve.frr[i] + t * (curve.frr[i + 1] - curve.frr[i]))
    return float(curve.far[-1])


def relative_impact(frr_base: float, frr_sys: float) -> float:
    """Percent FRR change vs the baseline; positive = better than baseline."""
    if frr_base <= 0:
        raise BaselineZero("baseline FRR must be > 0")
    return 100.0 * (frr_base - frr_sys) / frr_base


def gap_recovery(impact_sys: float, impact_candidate_symmetric: float) -> float:
    """Fraction of the symmetric candidate-model gain achieved by the system."""
    if impact_candidate_symmetric <= 0:
        raise DegenerateGap("candidate symmetric impact must be > 0")
    return impact_sys / impact_candidate_symmetric


def score_trials(trialset: TrialSet, scorer, profile_vectors: dict,
                 runtime_vectors: dict) -> TrialSet:
    """Score every trial with a batch scorer (P, R) -> scores.

    profile_vectors maps enroll_speaker_id to a vector, runtime_vectors maps
    test_utterance_id to a vector. Score order matches trial order.
    """
    if not trialset.trials:
        return TrialSet([], [])
    p_rows, r_rows = [], []
    for t in trialset.trials:
        if t.enroll_speaker_id not in profile_vectors:
            raise UnknownId(f"unknown enroll speaker {t.enroll_speaker_id!r}")
        if t.test_utterance_id not in runtime_vectors:
            raise UnknownId(f"unknown test utterance {t.test_utterance_id!r}")
        p_rows.append(profile_vectors[t.enroll_speaker_id])
        r_rows.append(runtime_vectors[t.test_utterance_id])
    scores = scorer(np.stack(p_rows), np.stack(r_rows))
    return TrialSet(list(trialset.trials), [float(s) for s in scores])


def cosine_scorer(p: np.ndarray, r: np.ndarray) -> np.ndarray:
    num = np.sum(p * r, axis=1)
    den = np.linalg.norm(p, axis=1) * np.linalg.norm(r, axis=1)
    return num / den


def evaluate(trialset: TrialSet, scorer_id: str,
             far_targets=DEFAULT_FAR_TARGETS,
             baseline_frrs: dict | None = None,
             candidate_impacts: dict | None = None) -> dict:
    """Full report: EER plus FRR (and optional impact) at each FAR target.

    baseline_frrs / candidate_impacts map target-FAR keys (as formatted by
    far_key) to the baseline FRR and candidate symmetric impact respectively.
    """
    if trialset.scores is None:
        raise DegenerateTrialSet("trial set is not scored")
    curve = roc(trialset.scores, trialset.labels01())
    per_far = []
    recoveries = {}
    for target in far_targets:
        frr, thr = frr_at_far(curve, target)
        idx = np.nonzero(curve.thresholds == thr)[0][0]
        entry = {
            "target_far": target,
            "threshold": thr,
            "far": float(curve.far[idx]),
            "frr": frr,
        }
        key = far_key(target)
        if baseline_frrs is not None and key in baseline_frrs:
            entry["relative_impact"] = relative_impact(baseline_frrs[key], frr)
            if candidate_impacts is not None and key in candidate_impacts:
                recoveries[key] = gap_recovery(entry["relative_impact"],
                                               candidate_impacts[key])
        per_far.append(entry)
    report = {
        "scorer_id": scorer_id,
        "n_target": curve.n_target,
        "n_imposter": curve.n_imposter,
        "eer": eer(curve),
        "per_far": per_far,
    }
    if recoveries:
        report["gap_recovery"] = recoveries
    return report


def far_key(target_far: float) -> str:
    return format_float(target_far)


def save_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
