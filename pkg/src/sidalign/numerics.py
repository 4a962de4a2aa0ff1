"""Dense linear algebra and seeded randomness primitives.

All vectors and matrices are float64 numpy arrays. Operations validate
finiteness and dimensions and raise the package exception types instead of
letting numpy produce NaNs silently.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NotDecomposable, NotSymmetric, ZeroVector

# Norms below this are treated as the zero vector; far below any realistic
# embedding norm.
EPS_NORM = 1e-12

# Jitter ladder multipliers for near-singular Gram matrices, scaled by
# trace(a)/dim(a).
JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


def as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ZeroVector("vector contains non-finite entries")
    return arr


def as_matrix(a) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ZeroVector("matrix contains non-finite entries")
    return arr


def length_normalize(v) -> np.ndarray:
    """Return v / ||v||_2, raising ZeroVector for degenerate input."""
    arr = as_vector(v)
    norm = float(np.linalg.norm(arr))
    if norm <= EPS_NORM:
        raise ZeroVector(f"cannot normalize vector with norm {norm:g}")
    return arr / norm


def cosine_similarity(a, b) -> float:
    va = as_vector(a)
    vb = as_vector(b)
    if va.shape != vb.shape:
        raise DimensionMismatch(f"cosine of {va.shape} vs {vb.shape}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na <= EPS_NORM or nb <= EPS_NORM:
        raise ZeroVector("cosine similarity of a zero vector")
    return float(np.dot(va, vb) / (na * nb))


def matmul(a, b) -> np.ndarray:
    ma = as_matrix(a)
    mb = as_matrix(b)
    if ma.shape[1] != mb.shape[0]:
        raise DimensionMismatch(f"matmul {ma.shape} x {mb.shape}")
    return ma @ mb


def matvec(a, v) -> np.ndarray:
    ma = as_matrix(a)
    vv = as_vector(v)
    if ma.shape[1] != vv.shape[0]:
        raise DimensionMismatch(f"matvec {ma.shape} x {vv.shape}")
    return ma @ vv


def cholesky_upper(a, max_jitter_ladder=JITTER_LADDER) -> tuple[np.ndarray, float]:
    """Upper-triangular M with M^T M = a (+ jitter*I when a is near singular).

    Returns (m, jitter_applied). Near-singular input is handled by a jitter
    ladder scaled by trace(a)/dim(a); NotDecomposable is raised only when the
    largest jitter still fails (indefinite input).
    """
    ma = as_matrix(a)
    n, m = ma.shape
    if n != m:
        raise DimensionMismatch(f"cholesky of non-square matrix {ma.shape}")
    scale = float(np.max(np.abs(ma)))
    asym = float(np.max(np.abs(ma - ma.T)))
    if asym > 1e-9 * max(scale, 1.0):
        raise NotSymmetric(f"matrix asymmetry {asym:g} exceeds tolerance")
    sym = 0.5 * (ma + ma.T)
    base = float(np.trace(sym)) / n if n else 0.0
    for lam in max_jitter_ladder:
        jitter = lam * base
        target = sym + jitter * np.eye(n)
        try:
            lower = np.linalg.cholesky(target)
        except np.linalg.LinAlgError:
            continue
        # Reject numerically bogus factorizations of near-singular input.
        rel = np.linalg.norm(lower @ lower.T - target) / max(np.linalg.norm(target), 1e-300)
        if rel > 1e-8:
            continue
        return lower.T.copy(), jitter
    raise NotDecomposable("matrix is not positive definite even after max jitter")


class Prng:
    """Deterministic random stream (PCG64); identical seed => identical stream.

    Single-owner: concurrent use requires independent instances.
    """

    ALGORITHM = "pcg64"

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def standard_normal(self, *shape) -> np.ndarray:
        return self._gen.standard_normal(shape if shape else None)

    def uniform(self, lo: float, hi: float, n: int | None = None) -> np.ndarray:
        if hi <= lo:
            raise ValueError(f"uniform requires lo < hi, got [{lo}, {hi})")
        return self._gen.uniform(lo, hi, n)

    def integers(self, lo: int, hi: int, n: int | None = None):
        return self._gen.integers(lo, hi, size=n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def spawn(self) -> "Prng":
        """Derive an independent child stream (deterministic per call order)."""
        child = Prng(0)
        child._gen = np.random.Generator(np.random.PCG64(self._gen.integers(0, 2**63)))
        return child


def random_orthogonal(rows: int, cols: int, prng: Prng) -> np.ndarray:
    """Random matrix with orthonormal columns (rows >= cols required)."""
    if rows < cols:
        raise DimensionMismatch(f"orthonormal columns need rows >= cols, got {rows}x{cols}")
    g = prng.standard_normal(rows, cols)
    q, r = np.linalg.qr(g)
    # Fix signs so the map is unique given the Gaussian draw.
    q = q * np.sign(np.diag(r))
    return q
