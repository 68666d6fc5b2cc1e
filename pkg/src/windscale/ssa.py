"""Singular spectrum analysis with the lagged-correlation (Toeplitz) variant.

The series is embedded with window length M, the symmetric Toeplitz matrix of
lagged correlations is eigendecomposed, and principal components are projected
back into series-length reconstructed components by diagonal averaging.  The
leading reconstructed component typically carries the trend; the sum of all M
components reproduces the input.

Diagonal averaging uses boundary-corrected denominators (the number of terms
actually contributing, which is below M near the edges), so reconstructed
components are defined on all N points and completeness holds globally; on
interior points this reduces to the plain 1/M average.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import NumericalError
from .series import TimeSeries

__all__ = [
    "SsaConfig",
    "SsaDecomposition",
    "TrendSplit",
    "default_window",
    "toeplitz_correlation",
    "decompose",
    "split_trend",
    "write_eigenvalue_csv",
]


@dataclass(frozen=True)
class SsaConfig:
    """Window choice for the decomposition.

    Either give M explicitly or leave it None to derive it from the record
    length with exponent c: M = round((ln N)**c), clamped to [2, N//5].
    The correlation matrix is built from the mean-removed series unless
    ``centered`` is switched off (kept for testing the uncentered variant).
    """

    M: int | None = None
    c: float = 2.5
    variant: str = "toeplitz"
    centered: bool = True

    def __post_init__(self):
        if self.variant != "toeplitz":
            raise ValueError(f"unsupported variant {self.variant!r}")
        if self.M is None and not (1.5 <= self.c <= 2.5):
            raise ValueError(f"window-rule exponent c must lie in [1.5, 2.5], got {self.c}")

    def window(self, n: int) -> int:
        if self.M is not None:
            if not (1 < self.M < n):
                raise ValueError(f"need 1 < M < N, got M={self.M}, N={n}")
            return int(self.M)
        return default_window(n, self.c)


@dataclass(frozen=True)
class SsaDecomposition:
    """Eigenstructure plus principal and reconstructed components.

    eigenvectors[:, k] is the k-th eigenvector; pcs[:, k] (length N-M+1) and
    rcs[:, k] (length N) are the matching principal and reconstructed
    components, ordered by descending eigenvalue.
    """

    M: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    pcs: np.ndarray
    rcs: np.ndarray
    variance_fractions: np.ndarray
    n_clamped: int
    series_mean: float

    def __post_init__(self):
        for name in ("eigenvalues", "eigenvectors", "pcs", "rcs", "variance_fractions"):
            arr = np.asarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class TrendSplit:
    """Trend (sum of selected reconstructed components) and what is left."""

    trend: TimeSeries
    residual: TimeSeries
    selected: tuple


def default_window(N, c=2.5) -> int:
    """Window length from the record length: round((ln N)**c), kept inside
    [2, N//5] so the embedding stays well below the series length."""
    if N < 8:
        raise ValueError(f"need N >= 8 to choose a window, got {N}")
    if not (1.5 <= c <= 2.5):
        raise ValueError(f"c must lie in [1.5, 2.5], got {c}")
    m = int(round(np.log(N) ** c))
    return int(min(max(m, 2), N // 5))


def toeplitz_correlation(ts, M, centered=True) -> np.ndarray:
    """Symmetric Toeplitz matrix of lagged correlations.

    Entry (i, j) is the lag-|i-j| correlation sum divided by the number of
    available products, N - |i-j|.  The series mean is removed first unless
    ``centered`` is False.
    """
    x = np.asarray(getattr(ts, "values", ts), dtype=float)
    N = x.size
    if not (1 <= M < N):
        raise ValueError(f"need 1 <= M < N, got M={M}, N={N}")
    if centered:
        x = x - x.mean()
    acf = np.empty(M)
    for lag in range(M):
        acf[lag] = (x[: N - lag] @ x[lag:]) / (N - lag)
    idx = np.abs(np.subtract.outer(np.arange(M), np.arange(M)))
    return acf[idx]


def _fix_signs(vectors):
    """Deterministic eigenvector orientation: first nonzero component > 0."""
    out = vectors.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-300)
        if nz.size and col[nz[0]] < 0:
            out[:, k] = -col
    return out


def _diagonal_average(pcs, vectors, N):
    """Reconstructed components: rc_k[t] = sum_j pcs[t-j, k] * vectors[j, k]
    over valid j, divided by the number of contributing terms."""
    K, M = pcs.shape
    t = np.arange(N)
    weights = np.minimum.reduce([t + 1, np.full(N, M), np.full(N, K), N - t])
    rcs = np.empty((N, M))
    chunk = max(1, int(4e6) // max(N, 1))
    for lo in range(0, M, chunk):
        hi = min(lo + chunk, M)
        rcs[:, lo:hi] = fftconvolve(pcs[:, lo:hi], vectors[:, lo:hi], mode="full", axes=0)
    rcs /= weights[:, None]
    return rcs


def decompose(ts: TimeSeries, cfg: SsaConfig | None = None) -> SsaDecomposition:
    """Full decomposition of a series into M reconstructed components.

    The eigenstructure comes from the (by default mean-removed) lagged
    correlation matrix; the raw series is then projected through that
    orthonormal basis, so the M reconstructed components sum back to the
    original series on every index.
    """
    cfg = cfg or SsaConfig()
    x = ts.values
    N = x.size
    M = cfg.window(N)

    corr = toeplitz_correlation(x, M, centered=cfg.centered)
    try:
        eigvals, eigvecs = np.linalg.eigh(corr)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed for M={M}: {exc}") from exc
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = _fix_signs(eigvecs[:, order])

    n_clamped = int(np.count_nonzero(eigvals < 0.0))
    if n_clamped:
        scale = abs(eigvals[0]) if eigvals[0] != 0 else 1.0
        worst = eigvals.min() / scale
        if worst < -1e-10:
            warnings.warn(
                f"{n_clamped} eigenvalue(s) clamped to zero; most negative was "
                f"{worst:.3e} of the leading eigenvalue", stacklevel=2)
        eigvals = np.maximum(eigvals, 0.0)

    total = eigvals.sum()
    fractions = eigvals / total if total > 0 else np.zeros_like(eigvals)

    traj = np.lib.stride_tricks.sliding_window_view(x, M)  # (K, M), K = N-M+1
    pcs = traj @ eigvecs
    rcs = _diagonal_average(pcs, eigvecs, N)
    return SsaDecomposition(
        M=M,
        eigenvalues=eigvals,
        eigenvectors=eigvecs,
        pcs=pcs,
        rcs=rcs,
        variance_fractions=fractions,
        n_clamped=n_clamped,
        series_mean=float(x.mean()) if cfg.centered else 0.0,
    )


def split_trend(dec: SsaDecomposition, selected, original: TimeSeries) -> TrendSplit:
    """Trend = sum of the selected components (1-based indices, default {1});
    residual = original - trend, so the two add back exactly."""
    selected = tuple(sorted(set(int(k) for k in selected)))
    if not selected:
        raise ValueError("selected component set must be non-empty")
    for k in selected:
        if not (1 <= k <= dec.M):
            raise ValueError(f"component index {k} out of range 1..{dec.M}")
    if dec.rcs.shape[0] != original.values.size:
        raise ValueError("decomposition does not match the original series length")
    trend = dec.rcs[:, [k - 1 for k in selected]].sum(axis=1)
    residual = original.values - trend
    return TrendSplit(
        trend=original.with_values(trend, label=f"{original.label}-trend"),
        residual=original.with_values(residual, label=f"{original.label}-residual"),
        selected=selected,
    )


def write_eigenvalue_csv(dec: SsaDecomposition, path):
    """Two columns (k, variance_fraction) for eigenvalue-spectrum plots."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "variance_fraction"])
        for k, frac in enumerate(dec.variance_fractions, start=1):
            writer.writerow([k, format(frac, ".17g")])
