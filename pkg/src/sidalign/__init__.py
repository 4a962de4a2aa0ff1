"""Speaker embedding space alignment backends for asymmetric SID."""

from .align import (
    Checkpoint,
    NegativeBank,
    NessaConfig,
    PairBatch,
    PairedData,
    load_checkpoint,
    loss_m1,
    loss_m2,
    loss_m3,
    map_profiles,
    map_runtime,
    sample_negative_bank,
    save_checkpoint,
    train,
    transform_profiles_offline,
)
from .data import (
    Corpus,
    EmbeddingRecord,
    Trial,
    TrialSet,
    VoiceProfile,
    build_all_profiles,
    build_voice_profile,
    load_embeddings,
    load_trials,
    save_embeddings,
    save_scores,
    save_trials,
)
from .logit import (
    FusionTransform,
    WeightMatrix,
    build_weight_matrix,
    compute_fusion_transform,
    logit_score_direct,
    logit_score_fused,
    logit_score_fused_batch,
)
from .metrics import (
    RocCurve,
    eer,
    evaluate,
    frr_at_far,
    gap_recovery,
    relative_impact,
    roc,
    score_trials,
)
from .mlp import (
    AdamState,
    LrSchedule,
    Mlp,
    adam_step,
    backward,
    forward,
    gradient_check,
    lr_at,
    mlp_init,
)
from .numerics import (
    Prng,
    cholesky_upper,
    cosine_similarity,
    length_normalize,
    matmul,
    matvec,
)
from .synth import GroundTruth, SynthConfig, generate, make_trials

__version__ = "0.1.0"
