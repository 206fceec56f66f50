"""Window extraction, stride downsampling, Hankel embedding and null-space shapelets.

Indices in docstrings are zero-based unless stated otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericalError, ValidationError


@dataclass(frozen=True)
class WindowConfig:
    """A window/embedding/shift triplet ``(r, l, k)``.

    ``r`` is the window length, ``l`` the embedding dimension and ``k`` the
    shift between consecutive windows. Windows are downsampled with the inner
    stride ``s = (r - 1) / (2l - 2)``, which must be a positive integer.
    """

    r: int
    l: int
    k: int = 1

    def __post_init__(self):
        for name in ("r", "l", "k"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, np.integer)):
                raise ValidationError(f"{name} must be an integer, got {val!r}")
            object.__setattr__(self, name, int(val))
        if self.l < 2:
            raise ValidationError(f"l must be >= 2, got {self.l}")
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.r < 2 * self.l - 1:
            raise ValidationError(f"r must be >= 2l-1 = {2 * self.l - 1}, got {self.r}")
        if (self.r - 1) % (2 * self.l - 2):
            raise ValidationError(
                f"(2l-2)={2 * self.l - 2} does not divide (r-1)={self.r - 1} for (r={self.r}, l={self.l})"
            )

    @property
    def s(self) -> int:
        return (self.r - 1) // (2 * self.l - 2)

    def num_windows(self, h: int) -> int:
        """Number of length-r windows in a series of length ``h``."""
        return max(0, (h - self.r + 1) // self.k)

    def num_rows(self, h: int) -> int:
        """Row count ``o = floor((h - s*l + 1) / k)`` of the embedding matrix."""
        return max(0, (h - self.s * self.l + 1) // self.k)

    def as_tuple(self):
        return (self.r, self.l, self.k)


@dataclass(frozen=True)
class Shapelet:
    v: np.ndarray
    eigenvalue: float
    residual: float


def make_configs(R=None, L=5, K=1):
    """Broadcast scalar/list ``R``, ``L``, ``K`` into a list of WindowConfig.

    Scalars apply to every entry; lists must share one length. ``R=None``
    means ``r = 2l - 1`` for each ``l`` (no downsampling).
    """

    def as_list(x):
        if x is None:
            return None
        if isinstance(x, (list, tuple, np.ndarray)):
            return [int(v) for v in x]
        return [int(x)]

    rs, ls, ks = as_list(R), as_list(L), as_list(K)
    lens = {len(x) for x in (rs, ls, ks) if x is not None and len(x) > 1}
    if len(lens) > 1:
        raise ValidationError(f"R, L and K lists must have the same length, got lengths {sorted(lens)}")
    g = lens.pop() if lens else 1
    for x in (rs, ls, ks):
        if x is not None and len(x) == 0:
            raise ValidationError("empty R/L/K list")

    def pick(x, i):
        return x[i] if len(x) > 1 else x[0]

    configs = []
    for i in range(g):
        l = pick(ls, i)
        r = pick(rs, i) if rs is not None else 2 * l - 1
        try:
            configs.append(WindowConfig(r, l, pick(ks, i)))
        except ValidationError as exc:
            raise ValidationError(f"config {i + 1}: {exc}") from None
    return configs


def extract_windows(series, cfg: WindowConfig, instance=None) -> np.ndarray:
    """All length-r windows starting at ``p*k`` for ``p < floor((h-r+1)/k)``.

    Returns a read-only ``(W, r)`` view into ``series``.
    """
    x = np.asarray(series, dtype=np.float64)
    h = x.shape[0]
    if cfg.r > h:
        who = f" (instance {instance})" if instance is not None else ""
        raise ValidationError(f"window r={cfg.r} exceeds series length h={h}{who}")
    W = max(0, (h - cfg.r + 1) // cfg.k)
    x = np.ascontiguousarray(x)
    return np.lib.stride_tricks.as_strided(
        x, shape=(W, cfg.r), strides=(cfg.k * x.strides[0], x.strides[0]), writeable=False
    )


def downsample(window, cfg: WindowConfig) -> np.ndarray:
    """Keep every s-th sample of a length-r window: ``2l - 1`` points, endpoints included."""
    w = np.asarray(window, dtype=np.float64)
    if w.shape[-1] != cfg.r:
        raise ValidationError(f"window length {w.shape[-1]} != r={cfg.r}")
    return w[..., :: cfg.s]


def hankel_embed(z) -> np.ndarray:
    """``S[a, b] = z[a + b]`` for a vector of odd length ``2l - 1``."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] % 2 == 0:
        raise ValidationError(f"hankel_embed needs a vector of odd length, got shape {z.shape}")
    l = (z.shape[0] + 1) // 2
    return kernels.hankel_stack(z[None, :], l)[0]


def eig_symmetric(S):
    """Eigenpairs of a small symmetric matrix by cyclic Jacobi.

    Eigenvalues come back ordered by absolute value (near-ties by signed
    value, then by Jacobi column); eigenvectors are the matching columns.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {S.shape}")
    fro = float(np.linalg.norm(S))
    if np.max(np.abs(S - S.T), initial=0.0) > 1e-12 * max(1.0, fro):
        raise ValidationError("matrix is not symmetric")
    w, V, sweeps = kernels.jacobi(S)
    if sweeps < 0:
        raise NumericalError(
            f"Jacobi eigensolver did not converge within {kernels.JACOBI_MAX_SWEEPS} sweeps", matrix=S
        )
    order = kernels.eig_order(w, kernels.EIG_TIE_REL_TOL * max(1.0, fro))
    return w[order], V[:, order]


def compute_shapelet(z) -> Shapelet:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] % 2 == 0 or z.shape[0] < 3:
        raise ValidationError(f"shapelet window must have odd length >= 3, got shape {z.shape}")
    l = (z.shape[0] + 1) // 2
    V, lam, resid, sweeps = shapelets_from_windows(z[None, :], l)
    return Shapelet(v=V[0], eigenvalue=float(lam[0]), residual=float(resid[0]))


def shapelets_from_windows(Z, l):
    """Vectorised :func:`compute_shapelet` over the rows of ``Z``."""
    V, lam, resid, sweeps = kernels.batch_shapelets(Z, l)
    bad = np.flatnonzero(sweeps < 0)
    if bad.size:
        S = hankel_embed(np.asarray(Z)[bad[0]])
        raise NumericalError(
            f"Jacobi eigensolver did not converge within {kernels.JACOBI_MAX_SWEEPS} sweeps "
            f"(window {int(bad[0])})",
            matrix=S,
        )
    return V, lam, resid, sweeps


def series_shapelets(series, cfg: WindowConfig, instance=None) -> np.ndarray:
    """Shapelets of every window of one channel, as an ``l x W`` column matrix."""
    windows = extract_windows(series, cfg, instance=instance)
    Z = np.ascontiguousarray(downsample(windows, cfg))
    if Z.shape[0] == 0:
        return np.empty((cfg.l, 0))
    V, _, _, _ = shapelets_from_windows(Z, cfg.l)
    return np.ascontiguousarray(V.T)

