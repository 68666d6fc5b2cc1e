"""Detrended fluctuation analysis.

The profile (cumulative sum of the mean-removed series) is split into
non-overlapping boxes, a polynomial local trend is removed per box, and the
pooled RMS residual F(n) is computed per box size n.  The slope of
log F(n) versus log n over a timescale window is the scaling exponent:
0.5 means uncorrelated, above 0.5 persistent, below 0.5 antipersistent.

Boxes are taken from both the start and the end of the profile, so every
sample contributes even when n does not divide N.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

__all__ = [
    "FluctuationFunction",
    "ScalingExponent",
    "dfa_profile",
    "dfa",
    "scaling_exponent",
    "default_box_grid",
    "write_fluctuation_csv",
]


@dataclass(frozen=True)
class FluctuationFunction:
    """F(n) per box size n, for one detrending order; dt converts n to minutes."""

    box_sizes: np.ndarray
    F: np.ndarray
    order: int
    dt: float = 1.0

    def __post_init__(self):
        ns = np.asarray(self.box_sizes, dtype=int)
        f = np.asarray(self.F, dtype=float)
        if ns.shape != f.shape:
            raise ValueError("box_sizes and F must have equal length")
        ns.flags.writeable = False
        f.flags.writeable = False
        object.__setattr__(self, "box_sizes", ns)
        object.__setattr__(self, "F", f)

    @property
    def minutes(self) -> np.ndarray:
        return self.box_sizes * self.dt


@dataclass(frozen=True)
class ScalingExponent:
    """OLS slope of log10 F versus log10 n restricted to a timescale window."""

    alpha: float
    stderr: float
    n_lo: float
    n_hi: float
    n_points: int

    def label(self) -> str:
        """Interpretive tag; always reported together with the stderr."""
        if self.alpha > 0.5:
            return "persistent"
        if self.alpha < 0.5:
            return "antipersistent"
        return "uncorrelated"

    def to_dict(self) -> dict:
        return {
            "alpha": float(self.alpha),
            "stderr": float(self.stderr),
            "window_minutes": [float(self.n_lo), float(self.n_hi)],
            "n_points": int(self.n_points),
            "label": self.label(),
        }


def dfa_profile(series) -> np.ndarray:
    """Cumulative sum of the mean-removed input; the last value is ~0."""
    x = np.asarray(series, dtype=float)
    if x.size < 2:
        raise ValueError("profile needs at least 2 samples")
    return np.cumsum(x - x.mean())


def _box_residual_sq(boxes, order):
    """Sum of squared residuals of a degree-`order` least-squares fit,
    per row of `boxes`.  The abscissa is normalised to [-1, 1]; any affine
    rescaling spans the same polynomial space, but this one keeps the
    Vandermonde matrix well conditioned for large boxes."""
    n = boxes.shape[1]
    t = np.linspace(-1.0, 1.0, n)
    V = np.vander(t, order + 1, increasing=True)
    Q, _ = np.linalg.qr(V)
    resid = boxes - (boxes @ Q) @ Q.T
    return np.einsum("ij,ij->i", resid, resid)


def dfa(series, order=1, box_sizes=None, dt=1.0) -> FluctuationFunction:
    """Fluctuation function of a scalar sequence.

    Parameters
    ----------
    series : array_like
        Raw samples; the profile is built internally.
    order : int
        Degree of the detrending polynomial (1 = DFA-1, 2 = DFA-2, 3 = DFA-3).
    box_sizes : sequence of int
        Strictly increasing box sizes; defaults to `default_box_grid`.
    dt : float
        Minutes per sample, carried into the result for window conversion.
    """
    x = np.asarray(series, dtype=float)
    N = x.size
    if order not in (1, 2, 3):
        raise ValueError(f"order must be 1, 2 or 3, got {order}")
    if np.ptp(x) == 0.0:
        raise NumericalError("constant series: F(n) is undefined")
    if box_sizes is None:
        box_sizes = default_box_grid(N, dt, t_min=max(10.0 * dt, (order + 2) * dt))
    ns = np.asarray(box_sizes, dtype=int)
    if ns.size == 0:
        raise ValueError("empty box-size grid")
    if np.any(np.diff(ns) <= 0):
        raise ValueError("box_sizes must be strictly increasing")
    if ns[0] < order + 2:
        raise ValueError(
            f"box size {ns[0]} too small for order {order} (need >= {order + 2})"
        )
    if ns[-1] > N // 4:
        raise ValueError(
            f"box size {ns[-1]} exceeds N/4 = {N // 4}; need at least 4 boxes"
        )

    y = dfa_profile(x)
    F = np.empty(ns.size)
    for i, n in enumerate(ns):
        nb = N // n
        fw = y[: nb * n].reshape(nb, n)
        bw = y[N - nb * n:].reshape(nb, n)
        ss = _box_residual_sq(fw, order).sum() + _box_residual_sq(bw, order).sum()
        F[i] = np.sqrt(ss / (2 * nb * n))
    return FluctuationFunction(box_sizes=ns, F=F, order=order, dt=dt)


def scaling_exponent(fluct: FluctuationFunction, t_lo, t_hi) -> ScalingExponent:
    """Least-squares slope of the fluctuation function in [t_lo, t_hi] minutes."""
    if not (t_lo < t_hi):
        raise ValueError("need t_lo < t_hi")
    minutes = fluct.minutes
    mask = (minutes >= t_lo) & (minutes <= t_hi)
    m = int(mask.sum())
    if m < 4:
        raise NumericalError(
            f"only {m} box sizes fall in [{t_lo}, {t_hi}] minutes; need >= 4"
        )
    if np.any(fluct.F[mask] <= 0):
        raise NumericalError("non-positive F(n) inside the fit window")
    lx = np.log10(minutes[mask])
    ly = np.log10(fluct.F[mask])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    sxx = np.sum((lx - lx.mean()) ** 2)
    stderr = np.sqrt(resid @ resid / (m - 2) / sxx) if m > 2 else float("nan")
    return ScalingExponent(alpha=float(slope), stderr=float(stderr),
                           n_lo=float(t_lo), n_hi=float(t_hi), n_points=m)


def default_box_grid(N, dt=1.0, t_min=10.0, points_per_decade=20) -> np.ndarray:
    """Log-spaced integer box sizes from t_min minutes up to N/10 samples."""
    n_lo = int(np.ceil(t_min / dt))
    n_hi = N // 10
    if n_lo < 2:
        n_lo = 2
    if n_hi <= n_lo:
        raise ValueError(
            f"empty grid: N/10 = {n_hi} samples does not exceed t_min = {n_lo} samples"
        )
    decades = np.log10(n_hi / n_lo)
    count = max(2, int(np.ceil(decades * points_per_decade)) + 1)
    grid = np.unique(np.rint(np.logspace(np.log10(n_lo), np.log10(n_hi), count)).astype(int))
    return grid


def write_fluctuation_csv(fluct: FluctuationFunction, path):
    """Two columns (n_minutes, F) for log-log plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_minutes", "F"])
        for n_min, f in zip(fluct.minutes, fluct.F):
            writer.writerow([format(n_min, ".17g"), format(f, ".17g")])
