"""Shared test utilities: independent brute-force oracles and generators.

Everything here deliberately avoids the package's vectorised code paths, so
the main implementations can be checked against naive arithmetic.
"""

import numpy as np


def brute_force_dfa(series, n, order):
    """Direct per-box fluctuation value: explicit profile, polyfit per box,
    boxes from both ends, pooled RMS."""
    x = np.asarray(series, dtype=float)
    N = x.size
    y = np.cumsum(x - x.mean())
    nb = N // n
    boxes = [y[k * n:(k + 1) * n] for k in range(nb)]
    boxes += [y[N - (k + 1) * n: N - k * n] for k in range(nb)]
    total = 0.0
    idx = np.arange(n, dtype=float)
    for box in boxes:
        coeff = np.polyfit(idx, box, order)
        resid = box - np.polyval(coeff, idx)
        total += float(resid @ resid)
    return np.sqrt(total / (2 * nb * n))


def brute_force_toeplitz(x, M, centered=True):
    """Double-loop lagged correlation matrix."""
    x = np.asarray(x, dtype=float)
    N = x.size
    if centered:
        x = x - x.mean()
    C = np.empty((M, M))
    for i in range(M):
        for j in range(M):
            lag = abs(i - j)
            s = 0.0
            for m in range(N - lag):
                s += x[m] * x[m + lag]
            C[i, j] = s / (N - lag)
    return C


def brute_force_ssa(x, M):
    """Literal loops for the whole decomposition: lag-correlation matrix of
    the centered series, eigen-structure, raw-series principal components and
    count-weighted diagonal averaging."""
    x = np.asarray(x, dtype=float)
    N = x.size
    C = brute_force_toeplitz(x, M, centered=True)
    vals, vecs = np.linalg.eigh(C)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order].copy()
    for k in range(M):
        nz = np.flatnonzero(np.abs(vecs[:, k]) > 0)
        if nz.size and vecs[nz[0], k] < 0:
            vecs[:, k] = -vecs[:, k]
    K = N - M + 1
    pcs = np.zeros((K, M))
    for i in range(K):
        for k in range(M):
            pcs[i, k] = sum(x[i + j] * vecs[j, k] for j in range(M))
    rcs = np.zeros((N, M))
    for t in range(N):
        for k in range(M):
            tot, cnt = 0.0, 0
            for j in range(M):
                if 0 <= t - j <= K - 1:
                    tot += pcs[t - j, k] * vecs[j, k]
                    cnt += 1
            rcs[t, k] = tot / cnt
    return vals, vecs, pcs, rcs


def trajectory_svd_ssa(x, M):
    """The embedding-matrix SVD variant, used only as a loose cross-check of
    the lag-correlation route on small instances."""
    x = np.asarray(x, dtype=float)
    N = x.size
    K = N - M + 1
    traj = np.empty((K, M))
    for i in range(K):
        traj[i] = x[i:i + M]
    u, s, vt = np.linalg.svd(traj, full_matrices=False)
    comps = []
    for k in range(M):
        rank1 = np.outer(u[:, k] * s[k], vt[k])
        rc = np.zeros(N)
        cnt = np.zeros(N)
        for i in range(K):
            for j in range(M):
                rc[i + j] += rank1[i, j]
                cnt[i + j] += 1
        comps.append(rc / cnt)
    return s ** 2 / K, np.array(comps).T


def band_averaged_psd(x, n_bands=24):
    """Log-band-averaged one-sided periodogram, for spectrum comparisons."""
    p = np.abs(np.fft.rfft(np.asarray(x, dtype=float))) ** 2
    p = p[1:]
    edges = np.unique(np.logspace(0, np.log10(p.size), n_bands + 1).astype(int))
    return np.array([p[a:b].mean() for a, b in zip(edges[:-1], edges[1:])])


def two_regime_noise(n, beta_slow, beta_fast, f_split_lo, f_split_hi, seed):
    """Gaussian noise whose spectral exponent ramps (log-linearly) from
    beta_slow below f_split_lo to beta_fast above f_split_hi; the amplitude
    profile integrates the local exponent so it stays continuous."""
    rng = np.random.default_rng(seed)
    n_bins = n // 2 + 1
    f = np.arange(n_bins) / n
    with np.errstate(divide="ignore"):
        ramp = (np.log(np.maximum(f, 1e-300)) - np.log(f_split_lo)) / (
            np.log(f_split_hi) - np.log(f_split_lo))
    beta = beta_slow + (beta_fast - beta_slow) * np.clip(ramp, 0.0, 1.0)
    lnf = np.log(np.maximum(f, f[1] / 2))
    ln_amp = np.zeros(n_bins)
    ln_amp[1:] = -np.cumsum(0.25 * (beta[1:] + beta[:-1]) * np.diff(lnf))
    amp = np.exp(ln_amp)
    amp[0] = 0.0
    coeff = (rng.standard_normal(n_bins) + 1j * rng.standard_normal(n_bins)) / np.sqrt(2)
    if n % 2 == 0:
        coeff[-1] = coeff[-1].real * np.sqrt(2)
    x = np.fft.irfft(amp * coeff, n=n)
    return x / x.std()


def write_csv(path, times_sec, values, header=("time", "value")):
    lines = [",".join(header)]
    for t, v in zip(times_sec, values):
        lines.append(f"{t},{v}")
    path.write_text("\n".join(lines) + "\n")
