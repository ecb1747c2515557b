"""Laser phase-diffusion model.

The laser's instantaneous phase is modeled as a Wiener process with
diffusion rate 2/tau_c, where tau_c = 1/(pi * linewidth) is the coherence
time.  The observable of interest is the phase accumulated over the
interferometer delay,

    dxi(t) = phi(t) - phi(t - T_delay),

which is zero-mean Gaussian with variance

    sigma^2 = 2 * T_delay / tau_c,        T_delay = fiber_index * length / c.

Reduced modulo 2*pi onto [-pi, pi) the increment follows the wrapped
(folded) Gaussian density

    f(x) = 1/(sigma*sqrt(2*pi)) * sum_k exp(-(x - 2*k*pi)^2 / (2*sigma^2)).

This module provides the variance law, the wrapped density, the wrapping
map, and a reproducible generator of time-correlated increment sequences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import rng
from .errors import ParameterError

#: Speed of light in vacuum, m/s (exact by SI definition).
SPEED_OF_LIGHT = 299_792_458.0

#: Default truncation of the wrapped-Gaussian sum.  Terms with |k| > 10
#: are below 1e-20 for sigma^2 <= 100.
DEFAULT_K_MAX = 10

#: Grid steps generated per chunk when streaming long correlated paths.
_CHUNK_GRID_STEPS = 1 << 22

_TWO_PI = 2.0 * np.pi


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class LaserParams:
    """Laser source parameters.

    ``coherence_time`` and ``linewidth`` are locked together by
    tau_c = 1/(pi * linewidth); pass either one and the other is derived.
    Passing both is allowed only when they agree to 1e-12 relative.
    """

    linewidth: float = 0.0            # Hz
    coherence_time: float = 0.0       # s
    mean_power: float = 1.0           # W
    intensity_sigma: float = 0.0      # W, std. dev. of power fluctuations

    def __post_init__(self):
        lw = float(self.linewidth)
        tc = float(self.coherence_time)
        if lw <= 0.0 and tc <= 0.0:
            raise ParameterError("one of linewidth or coherence_time must be positive")
        if lw > 0.0 and tc > 0.0:
            derived = 1.0 / (np.pi * lw)
            if abs(derived - tc) > 1e-12 * tc:
                raise ParameterError(
                    f"linewidth {lw} Hz and coherence_time {tc} s disagree: "
                    f"expected tau_c = 1/(pi*linewidth) = {derived} s")
        elif lw > 0.0:
            object.__setattr__(self, "coherence_time", 1.0 / (np.pi * lw))
        else:
            object.__setattr__(self, "linewidth", 1.0 / (np.pi * tc))
        for name in ("linewidth", "coherence_time"):
            _require_finite(name, getattr(self, name))
        if not (float(self.mean_power) > 0.0) or not np.isfinite(self.mean_power):
            raise ParameterError(f"mean_power must be positive, got {self.mean_power}")
        if not (float(self.intensity_sigma) >= 0.0) or not np.isfinite(self.intensity_sigma):
            raise ParameterError(
                f"intensity_sigma must be non-negative, got {self.intensity_sigma}")


@dataclass(frozen=True)
class PhasePath:
    """A sampled sequence of delay-line phase increments dxi.

    ``increments`` holds the raw (unwrapped) Gaussian increments; wrap with
    :func:`wrap_phase` when the folded value is needed.  The same seed and
    parameters always reproduce the identical array.
    """

    increments: np.ndarray = field(repr=False)
    sample_period: float
    delay_time: float
    rng_seed: int

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=np.float64)
        if inc.ndim != 1 or inc.size == 0:
            raise ParameterError("increments must be a non-empty 1-D array")
        object.__setattr__(self, "increments", inc)

    def __len__(self) -> int:
        return self.increments.size


def delay_time(delay_length: float, fiber_index: float) -> float:
    """Propagation delay of a fiber delay line, T = n * L / c."""
    delay_length = _require_finite("delay_length", delay_length)
    fiber_index = _require_finite("fiber_index", fiber_index)
    if delay_length < 0.0:
        raise ParameterError(f"delay_length must be >= 0, got {delay_length}")
    if fiber_index < 1.0:
        raise ParameterError(f"fiber_index must be >= 1, got {fiber_index}")
    return fiber_index * delay_length / SPEED_OF_LIGHT


def phase_variance(delay_length: float, fiber_index: float,
                   coherence_time: float) -> float:
    """Variance (rad^2) of the phase accumulated over the delay line.

    Returns 2 * (fiber_index * delay_length / c) / coherence_time.
    """
    coherence_time = _require_finite("coherence_time", coherence_time)
    if coherence_time <= 0.0:
        raise ParameterError(f"coherence_time must be > 0, got {coherence_time}")
    return 2.0 * delay_time(delay_length, fiber_index) / coherence_time


def wrap_phase(x):
    """Map phase(s) onto the half-open interval [-pi, pi).

    The output is congruent to ``x`` modulo 2*pi; the boundary convention
    sends +pi to -pi.  Accepts scalars or arrays.
    """
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ParameterError("wrap_phase requires finite input")
    wrapped = np.mod(arr + np.pi, _TWO_PI) - np.pi
    # Guard against round-off landing exactly on +pi.
    wrapped = np.where(wrapped >= np.pi, wrapped - _TWO_PI, wrapped)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(wrapped)
    return wrapped


def wrapped_gaussian_pdf(x, sigma_sq: float, k_max: int = DEFAULT_K_MAX):
    """Density on [-pi, pi) of a zero-mean Gaussian wrapped modulo 2*pi.

    Evaluates the shifted-replica sum truncated to |k| <= k_max:

        f(x) = 1/(sigma*sqrt(2*pi)) * sum_{|k| <= k_max}
               exp(-(x - 2*k*pi)^2 / (2*sigma^2))

    With k_max >= 10 the truncation keeps the integral over [-pi, pi)
    within 1e-9 of 1 for sigma_sq <= 100; very large variances need a
    proportionally larger k_max (roughly k_max >= sigma).
    """
    sigma_sq = _require_finite("sigma_sq", sigma_sq)
    if sigma_sq <= 0.0:
        raise ParameterError(f"sigma_sq must be > 0, got {sigma_sq}")
    k_max = int(k_max)
    if k_max < 1:
        raise ParameterError(f"k_max must be >= 1, got {k_max}")
    arr = np.asarray(x, dtype=np.float64)
    sigma = np.sqrt(sigma_sq)
    k = np.arange(-k_max, k_max + 1, dtype=np.float64)
    shifted = arr[..., np.newaxis] - _TWO_PI * k
    dens = np.exp(-0.5 * (shifted / sigma) ** 2).sum(axis=-1)
    dens /= sigma * np.sqrt(_TWO_PI)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(dens)
    return dens


def _grid_ratio(sample_period: float, delay_time_: float,
                max_steps_per_sample: int = 64) -> tuple[int, int]:
    """Choose grid steps per sample period (M) and per delay (D).

    Finds a small rational approximation M/D to sample_period/delay_time so
    the Wiener path can be built on a common grid: each output sample
    advances M grid steps and spans a window of D steps.  The lag-1
    correlation of the windowed increments is then 1 - M/D, within the
    approximation error of the fraction (at most ~1/denominator_limit).
    """
    ratio = sample_period / delay_time_
    best = None
    for limit in (4096, 1024, 256, 64, 16, 4):
        frac = Fraction(ratio).limit_denominator(limit)
        if frac.numerator == 0:
            continue
        if frac.numerator <= max_steps_per_sample:
            best = frac
            break
    if best is None:
        best = Fraction(1, max(1, round(1.0 / ratio)))
    if best.denominator > 100_000_000:
        raise ParameterError(
            f"delay_time / sample_period ratio {1.0 / ratio:.3g} is too extreme "
            "to realize on a common grid")
    return best.numerator, best.denominator


def sample_phase_path(laser: LaserParams, delay_time: float,
                      sample_period: float, count: int, seed: int,
                      stream: int = 0) -> PhasePath:
    """Generate ``count`` correlated delay-line phase increments.

    The underlying laser phase is a Wiener process with diffusion 2/tau_c,
    realized on a grid that subdivides both the sample period and the delay
    (see :func:`_grid_ratio`).  Sample i is the window sum
    phi(t_i) - phi(t_i - delay_time), so

    * each increment is N(0, 2*delay_time/tau_c) exactly, and
    * adjacent increments have correlation max(0, 1 - sample_period/delay_time)
      in expectation (overlapping Brownian windows).

    When sample_period >= delay_time the windows are disjoint and the
    increments are drawn i.i.d. directly.
    """
    count = int(count)
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    delay_time = _require_finite("delay_time", delay_time)
    sample_period = _require_finite("sample_period", sample_period)
    if delay_time <= 0.0:
        raise ParameterError(f"delay_time must be > 0, got {delay_time}")
    if sample_period <= 0.0:
        raise ParameterError(f"sample_period must be > 0, got {sample_period}")
    seed = rng.check_seed(seed)

    sigma_sq = 2.0 * delay_time / laser.coherence_time
    sigma = np.sqrt(sigma_sq)

    if sample_period >= delay_time:
        increments = sigma * rng.standard_normals(count, seed, stream)
    else:
        m_steps, d_steps = _grid_ratio(sample_period, delay_time)
        step_sigma = sigma / np.sqrt(d_steps)
        increments = np.empty(count, dtype=np.float64)
        # Windowed prefix sums over the grid, streamed in chunks; adjacent
        # chunks re-derive the d_steps of overlap from the same stream, and
        # ``carry`` propagates the walk value at each chunk boundary.
        chunk = max(1, _CHUNK_GRID_STEPS // m_steps)
        carry = 0.0
        for a in range(0, count, chunk):
            b = min(a + chunk, count)
            g0 = a * m_steps
            seg = rng.standard_normals_range(g0, (b - 1) * m_steps + d_steps,
                                             seed, stream)
            seg *= step_sigma
            walk = np.empty(seg.size + 1, dtype=np.float64)
            walk[0] = 0.0
            np.cumsum(seg, out=walk[1:])
            walk += carry
            starts = np.arange(b - a, dtype=np.intp) * m_steps
            increments[a:b] = walk[starts + d_steps] - walk[starts]
            if b < count:
                carry = walk[b * m_steps - g0]

    return PhasePath(increments=increments, sample_period=sample_period,
                     delay_time=delay_time, rng_seed=seed)
