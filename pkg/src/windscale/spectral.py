"""Power spectral density on a logarithmic frequency axis and power-law fits.

Each requested frequency gets its own segment length, chosen so the
frequency falls on an exact Fourier bin of that segment: long segments (few
averages) resolve the low end, short segments (many averages) stabilise the
high end.  Periodogram values at the bin are averaged over 50%-overlapping
tapered segments and normalised to a one-sided density, so the integral of
the PSD over frequency approximates the series variance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .series import TimeSeries

__all__ = [
    "PsdEstimate",
    "SpectralFit",
    "lpsd",
    "fit_spectral_exponent",
    "write_psd_csv",
]

_MIN_SEGMENT = 16


@dataclass(frozen=True)
class PsdEstimate:
    """One-sided PSD sampled on a logarithmic frequency grid.

    frequencies are in 1/min, strictly increasing within (0, Nyquist];
    segments_per_freq counts the averaged segments per point and `snapped`
    marks points whose segment length hit the [16, N] clamp.
    """

    frequencies: np.ndarray
    power: np.ndarray
    n_freqs: int
    window_kind: str
    segments_per_freq: np.ndarray
    snapped: np.ndarray
    dt: float

    def __post_init__(self):
        for name in ("frequencies", "power", "segments_per_freq", "snapped"):
            arr = np.asarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def to_dict(self) -> dict:
        return {
            "n_freqs": int(self.n_freqs),
            "window_kind": self.window_kind,
            "dt_minutes": float(self.dt),
            "frequencies_per_min": [float(f) for f in self.frequencies],
            "power": [float(p) for p in self.power],
            "segments_per_freq": [int(s) for s in self.segments_per_freq],
            "snapped": [bool(s) for s in self.snapped],
        }


@dataclass(frozen=True)
class SpectralFit:
    """Least-squares power-law fit: power ~ f**(-beta) over [f_lo, f_hi].

    beta is reported as the positive exponent of 1/f**beta, i.e. minus the
    log-log slope; intercept is log10 power at log10 f = 0.
    """

    beta: float
    intercept: float
    f_lo: float
    f_hi: float
    stderr_beta: float
    r2: float
    n_points: int

    def to_dict(self) -> dict:
        return {
            "beta": float(self.beta),
            "intercept": float(self.intercept),
            "band_per_min": [float(self.f_lo), float(self.f_hi)],
            "stderr_beta": float(self.stderr_beta),
            "r2": float(self.r2),
            "n_points": int(self.n_points),
        }


def _taper(kind, length):
    if kind == "hann":
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(length) / length)
    if kind in ("rect", "boxcar"):
        return np.ones(length)
    raise ValueError(f"unknown window_kind {kind!r}")


def lpsd(ts: TimeSeries, n_freqs=200, f_min=None, f_max=None, window_kind="hann"):
    """Logarithmic-frequency PSD estimate of a uniformly sampled series.

    Parameters
    ----------
    ts : TimeSeries
    n_freqs : int
        Number of log-spaced evaluation frequencies requested (>= 2); the
        result may hold fewer after snapping removes duplicate bins.
    f_min, f_max : float, optional
        Band in 1/min; defaults to [1/(N*dt), Nyquist].
    window_kind : {"hann", "rect"}
        Segment taper; hann with 50% overlap is the default.
    """
    x = ts.values
    N = x.size
    fs = 1.0 / ts.dt
    nyquist = fs / 2.0
    lowest = 1.0 / (N * ts.dt)
    if f_min is None:
        f_min = lowest
    if f_max is None:
        f_max = nyquist
    if n_freqs < 2:
        raise ValueError("n_freqs must be >= 2")
    if f_min < lowest * (1.0 - 1e-12):
        raise ValueError(f"f_min {f_min:g} below 1/(N*dt) = {lowest:g} per min")
    if f_max > nyquist * (1.0 + 1e-12):
        raise ValueError(f"f_max {f_max:g} above Nyquist = {nyquist:g} per min")
    if not (f_min < f_max):
        raise ValueError("need f_min < f_max")
    if N < 2 * _MIN_SEGMENT:
        raise NumericalError(f"series too short for a PSD estimate (N={N})")

    targets = f_min * (f_max / f_min) ** (np.arange(n_freqs) / (n_freqs - 1))
    ratio = (f_max / f_min) ** (1.0 / (n_freqs - 1))

    xc = x - x.mean()
    freqs, power, nseg_out, snapped = [], [], [], []
    cached = (None, None)  # segment lengths repeat only consecutively
    last_f = 0.0
    for f_t in targets:
        res = f_t * (ratio - 1.0)  # local grid spacing = target resolution
        L = int(round(fs / res))
        snap = False
        if L > N:
            L, snap = N, True
        if L < _MIN_SEGMENT:
            L, snap = _MIN_SEGMENT, True
        m = int(round(f_t * L * ts.dt))
        m = min(max(m, 1), L // 2)
        f_actual = m / (L * ts.dt)
        if f_actual <= last_f * (1.0 + 1e-12):
            continue  # duplicate bin after snapping
        last_f = f_actual

        if cached[0] != L:
            w = _taper(window_kind, L)
            hop = max(1, L // 2)
            n_seg = 1 + (N - L) // hop
            segs = np.lib.stride_tricks.sliding_window_view(xc, L)[::hop]
            cached = (L, (segs[:n_seg] * w, n_seg, w @ w))
        tapered, n_seg, s2 = cached[1]
        phase = np.exp((-2j * np.pi * m / L) * np.arange(L))
        bins = tapered @ phase
        mean_sq = np.mean(bins.real ** 2 + bins.imag ** 2)
        one_sided = 1.0 if (L % 2 == 0 and m == L // 2) else 2.0
        power.append(one_sided * mean_sq / (fs * s2))
        freqs.append(f_actual)
        nseg_out.append(n_seg)
        snapped.append(snap)

    return PsdEstimate(
        frequencies=np.array(freqs),
        power=np.array(power),
        n_freqs=len(freqs),
        window_kind=window_kind,
        segments_per_freq=np.array(nseg_out, dtype=int),
        snapped=np.array(snapped, dtype=bool),
        dt=ts.dt,
    )


def fit_spectral_exponent(psd: PsdEstimate, f_lo, f_hi) -> SpectralFit:
    """OLS of log10(power) on log10(frequency) over the in-band points."""
    if not (f_lo < f_hi):
        raise ValueError("need f_lo < f_hi")
    mask = (psd.frequencies >= f_lo) & (psd.frequencies <= f_hi)
    m = int(mask.sum())
    if m < 5:
        raise NumericalError(f"only {m} PSD points inside [{f_lo:g}, {f_hi:g}]; need >= 5")
    p = psd.power[mask]
    if np.any(p <= 0):
        raise NumericalError("non-positive power inside the fit band (log undefined)")
    lx = np.log10(psd.frequencies[mask])
    ly = np.log10(p)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    sxx = np.sum((lx - lx.mean()) ** 2)
    ssr = resid @ resid
    sst = np.sum((ly - ly.mean()) ** 2)
    stderr = np.sqrt(ssr / (m - 2) / sxx) if m > 2 else float("nan")
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    return SpectralFit(beta=float(-slope), intercept=float(intercept),
                       f_lo=float(f_lo), f_hi=float(f_hi),
                       stderr_beta=float(stderr), r2=float(r2), n_points=m)


def write_psd_csv(psd: PsdEstimate, path):
    """Two columns (frequency in 1/min, one-sided power density)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frequency_per_min", "power"])
        for f, p in zip(psd.frequencies, psd.power):
            writer.writerow([format(f, ".17g"), format(p, ".17g")])
