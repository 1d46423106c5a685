"""Fractional Brownian motion sampling on a regular time grid.

Two generators are provided:

* a spectral synthesizer after Yin (1996), which builds unit-step increments
  from a truncated spectral density and random phases, with an FFT fast path,
* an exact generator that factorizes the fBm covariance matrix (Cholesky)
  and is used as the distributional oracle in tests.

Both consume a ``numpy.random.Generator`` so that path-level reproducibility
is controlled entirely by the caller's seeding policy.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import lapack

# Cholesky of an n x n dense covariance is the oracle path, not the
# production path; keep it from eating the machine.
MAX_EXACT_STEPS = 2048


class CovarianceFactorizationError(ArithmeticError):
    """Cholesky breakdown of an fBm covariance matrix.

    ``pivot`` is the 1-based index of the first non-positive pivot reported
    by LAPACK ``dpotrf``.
    """

    def __init__(self, pivot: int, hurst: float, n_steps: int):
        self.pivot = int(pivot)
        super().__init__(
            f"covariance matrix for hurst={hurst}, n_steps={n_steps} is not "
            f"positive definite: factorization failed at pivot {self.pivot}"
        )


def _check_hurst(hurst: float) -> float:
    hurst = float(hurst)
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"hurst index must lie in (0, 1), got {hurst}")
    return hurst


@dataclass
class GaussianPath:
    """A sampled path on a uniform grid, pinned to zero at the origin."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if self.times.size < 2:
            raise ValueError("a path needs at least two grid points")
        if self.times[0] != 0.0 or self.values[0] != 0.0:
            raise ValueError("paths start at t=0 with value 0")
        steps = np.diff(self.times)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("times must form a uniform increasing grid")

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def horizon(self) -> float:
        return float(self.times[-1])


def fbm_covariance(t, s, hurst):
    """Covariance of fractional Brownian motion at times ``t`` and ``s``.

    cov(B_t, B_s) = (|t|^(2H) + |s|^(2H) - |t - s|^(2H)) / 2.
    Broadcasts over array arguments.
    """
    hurst = _check_hurst(hurst)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    two_h = 2.0 * hurst
    out = 0.5 * (
        np.abs(t) ** two_h + np.abs(s) ** two_h - np.abs(t - s) ** two_h
    )
    return out if out.ndim else float(out)


def increment_autocovariance(lag, hurst):
    """Autocovariance of unit-step fBm increments at integer ``lag``.

    R(m) = (|m + 1|^(2H) - 2 |m|^(2H) + |m - 1|^(2H)) / 2, an even function
    of the lag with R(0) = 1.  For |m| >= 2 the second difference is formed
    through expm1/log1p so that the heavy cancellation between the three
    power terms does not destroy relative accuracy at large lags.
    """
    hurst = _check_hurst(hurst)
    lag = np.asarray(lag)
    if not np.issubdtype(lag.dtype, np.integer):
        if not np.all(lag == np.round(lag)):
            raise ValueError("lag must be an integer")
    m = np.abs(lag).astype(float)
    two_h = 2.0 * hurst

    small = m <= 1.0
    out = np.empty(m.shape, dtype=float)
    ms = m[small]
    out[small] = 0.5 * ((ms + 1.0) ** two_h - 2.0 * ms**two_h + np.abs(ms - 1.0) ** two_h)

    mb = m[~small]
    if mb.size:
        u = 1.0 / mb
        bracket = np.expm1(two_h * np.log1p(u)) + np.expm1(two_h * np.log1p(-u))
        out[~small] = 0.5 * mb**two_h * bracket
    return out if out.ndim else float(out)


def spectral_density_truncated(freq, hurst, n):
    """Truncated spectral density of unit-step fBm increments.

    S_N(f) = sum_{m=-N/2}^{N/2-1} R(m) cos(2 pi m f) for f in [-1/2, 1/2],
    where N = ``n`` is the (even) number of increments being synthesized.
    The truncation makes the sum asymmetric in m, so S_N is not exactly even
    in f.  May go slightly negative; callers clamp at zero.
    """
    hurst = _check_hurst(hurst)
    n = int(n)
    if n < 2 or n % 2 != 0:
        raise ValueError(f"n must be a positive even increment count, got {n}")
    freq = np.asarray(freq, dtype=float)
    if np.any(np.abs(freq) > 0.5):
        raise ValueError("freq must lie in [-1/2, 1/2]")
    m = np.arange(-n // 2, n // 2)
    r = increment_autocovariance(m, hurst)
    out = np.cos(2.0 * np.pi * np.multiply.outer(freq, m)) @ r
    return out if out.ndim else float(out)


@lru_cache(maxsize=32)
def _spectral_amplitudes(hurst: float, n_even: int):
    """sqrt of the clamped truncated spectrum at the DFT frequencies.

    Returns (amplitudes in ascending-j order for j = -n/2 .. n/2-1,
    most negative raw spectral value encountered, 0.0 if none).
    """
    j = np.arange(-n_even // 2, n_even // 2)
    raw = spectral_density_truncated(j / n_even, hurst, n_even)
    floor = float(min(raw.min(), 0.0))
    amp = np.sqrt(np.clip(raw, 0.0, None))
    amp.setflags(write=False)
    return amp, floor


def spectral_clamp_floor(hurst, n) -> float:
    """Most negative raw spectral value clamped to zero for this (H, n).

    0.0 means the truncated spectrum was nonnegative everywhere.
    """
    n = int(n)
    n_even = n + (n % 2)
    return _spectral_amplitudes(_check_hurst(hurst), n_even)[1]


def spectral_increments_from_phases(phases, hurst, method="fft"):
    """Unit-step fBm increments from given phases.

    W_k = sqrt(2/N) sum_j sqrt(S_N(j/N)) cos(2 pi j k / N + phi_j),
    j = -N/2 .. N/2-1, with N = phases.shape[-1] (must be even).  ``phases``
    may be 1-d (one path) or 2-d (paths, N).  ``method`` selects the FFT
    evaluation or the direct O(N^2) sum; both produce the same increments to
    rounding noise, which the test suite pins down.
    """
    hurst = _check_hurst(hurst)
    phases = np.asarray(phases, dtype=float)
    n = phases.shape[-1]
    if n < 2 or n % 2 != 0:
        raise ValueError(f"phase count must be even and >= 2, got {n}")
    amp, _ = _spectral_amplitudes(hurst, n)

    if method == "fft":
        # W is the real part of an inverse DFT whose bin m = j mod N carries
        # sqrt(S(j/N)) e^{i phi_j}; rolling by -N/2 maps ascending-j order
        # onto the DFT bin order.
        coeff = np.roll(amp * np.exp(1j * phases), -(n // 2), axis=-1)
        return np.sqrt(2.0 * n) * np.fft.ifft(coeff, axis=-1).real
    if method == "direct":
        j = np.arange(-(n // 2), n // 2)
        k = np.arange(n)
        angle = (2.0 * np.pi / n) * np.outer(j, k)  # (n_j, n_k)
        return np.sqrt(2.0 / n) * np.einsum(
            "...j,jk->...k", amp * np.cos(phases), np.cos(angle)
        ) - np.sqrt(2.0 / n) * np.einsum(
            "...j,jk->...k", amp * np.sin(phases), np.sin(angle)
        )
    raise ValueError(f"unknown method {method!r}")


def draw_phases(rng, n_even: int, size=None):
    """i.i.d. uniform(0, 2 pi) phases, consumed in ascending-j order."""
    shape = (n_even,) if size is None else (size, n_even)
    return 2.0 * np.pi * rng.random(shape)


def generate_increments_spectral(hurst, n, rng, method="fft"):
    """Draw ``n`` unit-step fBm increments with the spectral synthesizer.

    An odd ``n`` is served by synthesizing the next even count and dropping
    the final increment, so the spectral formula always sees an even N.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"need a positive increment count, got {n}")
    n_even = n + (n % 2)
    phases = draw_phases(rng, n_even)
    return spectral_increments_from_phases(phases, hurst, method=method)[:n]


def assemble_fbm_path(increments, horizon, hurst) -> GaussianPath:
    """Scale unit-step increments onto the grid of ``[0, horizon]``.

    B at t_{k+1} is (T/N)^H times the cumulative sum of W_0 .. W_k.
    """
    hurst = _check_hurst(hurst)
    increments = np.asarray(increments, dtype=float)
    if increments.ndim != 1 or increments.size < 1:
        raise ValueError("increments must be a nonempty 1-d array")
    horizon = float(horizon)
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    n = increments.size
    values = np.empty(n + 1)
    values[0] = 0.0
    np.cumsum(increments, out=values[1:])
    values[1:] *= (horizon / n) ** hurst
    return GaussianPath(times=np.linspace(0.0, horizon, n + 1), values=values)


def generate_fbm_spectral(hurst, n_steps, horizon, rng) -> GaussianPath:
    """Spectral fBm path on ``n_steps`` uniform steps over ``[0, horizon]``."""
    w = generate_increments_spectral(hurst, n_steps, rng)
    return assemble_fbm_path(w, horizon, hurst)


@lru_cache(maxsize=8)
def exact_covariance_factor(hurst: float, n_steps: int, horizon: float):
    """Lower Cholesky factor of the fBm covariance on the interior grid.

    Grid points are t_1 .. t_N (t_0 = 0 carries no randomness).  Raises
    CovarianceFactorizationError with the failing pivot if the matrix is
    numerically not positive definite, and refuses n_steps > MAX_EXACT_STEPS.
    """
    hurst = _check_hurst(hurst)
    n_steps = int(n_steps)
    if n_steps < 1:
        raise ValueError(f"need a positive step count, got {n_steps}")
    if n_steps > MAX_EXACT_STEPS:
        raise ValueError(
            f"exact generator supports at most {MAX_EXACT_STEPS} steps, "
            f"got {n_steps}; use the spectral generator instead"
        )
    t = np.linspace(0.0, float(horizon), n_steps + 1)[1:]
    cov = fbm_covariance(t[:, None], t[None, :], hurst)
    c, info = lapack.dpotrf(cov, lower=1)
    if info > 0:
        raise CovarianceFactorizationError(info, hurst, n_steps)
    if info < 0:
        raise RuntimeError(f"dpotrf: illegal argument {-info}")
    factor = np.tril(c)
    factor.setflags(write=False)
    return factor


def generate_fbm_exact(hurst, n_steps, horizon, rng) -> GaussianPath:
    """Exact-covariance fBm path via Cholesky; the test oracle generator."""
    factor = exact_covariance_factor(float(hurst), int(n_steps), float(horizon))
    z = rng.standard_normal(factor.shape[0])
    values = np.empty(factor.shape[0] + 1)
    values[0] = 0.0
    values[1:] = factor @ z
    return GaussianPath(
        times=np.linspace(0.0, float(horizon), factor.shape[0] + 1), values=values
    )
