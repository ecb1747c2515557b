"""Interferometer and balanced-detector measurement chain.

Maps a sequence of delay-line phase increments through the unbalanced
interferometer, 90-degree hybrid, and two balanced homodyne detectors into
baseband I/Q voltages:

    V_I(t) = Z1*R1 * sqrt(P_S(t)*P_LO(t)) * cos(theta_0 + phi_0(t) + dxi(t)) + w1(t)
    V_Q(t) = Z2*R2 * sqrt(P_S(t)*P_LO(t)) * sin(theta_0 + phi_0(t) + dxi(t)) + w2(t)

where P_S = K*T*P_0 is the delayed signal-arm power (K the delay-line
transmission, T the input splitter transmittance), P_LO = (1-T)*P_0 the
local-oscillator power, theta_0 the static phase of the delay line, and
phi_0 the slow classical drift of the interferometer.

Each imperfection is individually switchable: laser intensity
fluctuations, additive electrical noise, classical phase drift, detector
gain mismatch, and a single-pole detector-bandwidth limit.  With every
switch off the trace is the ideal noiseless model.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from . import rng
from .errors import ParameterError
from .phasenoise import LaserParams, PhasePath, delay_time, phase_variance, wrap_phase

# Per-purpose RNG stream indices, so one trace seed yields independent
# noise draws that stay stable when switches are toggled.
_STREAM_INTENSITY_S = 1
_STREAM_INTENSITY_LO = 2
_STREAM_ELECTRICAL_I = 3
_STREAM_ELECTRICAL_Q = 4
_STREAM_DRIFT = 5


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise ParameterError(f"{name} must be positive and finite, got {value}")
    return value


@dataclass(frozen=True)
class InterferometerParams:
    """Unbalanced-interferometer geometry and phase offsets.

    ``drift_mode`` selects how the classical phase phi_0 evolves when the
    drift switch is on: "fixed" holds ``drift_phase`` constant; "slow-walk"
    random-walks from it with per-sample step ``drift_step`` (rad).
    """

    delay_length: float               # m
    fiber_index: float = 1.5
    delay_loss: float = 1.0           # K, power transmission of the delay arm
    bs_transmittance: float = 0.5     # T, input beamsplitter
    static_phase: float = 0.0         # rad, theta_0 from the delay line
    drift_phase: float = 0.0          # rad, phi_0 starting value
    drift_mode: str = "fixed"
    drift_step: float = 0.0           # rad per sample, slow-walk only

    def __post_init__(self):
        if not (0.0 < float(self.delay_loss) <= 1.0):
            raise ParameterError(f"delay_loss must be in (0, 1], got {self.delay_loss}")
        if not (0.0 < float(self.bs_transmittance) < 1.0):
            raise ParameterError(
                f"bs_transmittance must be in (0, 1), got {self.bs_transmittance}")
        if self.drift_mode not in ("fixed", "slow-walk"):
            raise ParameterError(f"unknown drift_mode {self.drift_mode!r}")
        if not (float(self.drift_step) >= 0.0 and np.isfinite(self.drift_step)):
            raise ParameterError(f"drift_step must be >= 0, got {self.drift_step}")
        object.__setattr__(self, "static_phase", wrap_phase(self.static_phase))
        object.__setattr__(self, "drift_phase", wrap_phase(self.drift_phase))
        # Range checks for delay_length/fiber_index happen here.
        delay_time(self.delay_length, self.fiber_index)

    @property
    def delay_time(self) -> float:
        return delay_time(self.delay_length, self.fiber_index)


@dataclass(frozen=True)
class DetectorParams:
    """One balanced-homodyne channel: gain, noise, bandwidth, and ADC."""

    transimpedance: float             # V/A
    responsivity: float = 1.0         # A/W
    electrical_noise_sigma: float = 0.0  # V
    response_time: float = 625e-12    # s
    adc_bits: int = 10
    adc_fullscale: float = 1.0        # V, half-range: ADC spans [-F, +F]

    def __post_init__(self):
        _check_positive("transimpedance", self.transimpedance)
        _check_positive("responsivity", self.responsivity)
        _check_positive("response_time", self.response_time)
        _check_positive("adc_fullscale", self.adc_fullscale)
        if not (float(self.electrical_noise_sigma) >= 0.0
                and np.isfinite(self.electrical_noise_sigma)):
            raise ParameterError(
                f"electrical_noise_sigma must be >= 0, got {self.electrical_noise_sigma}")
        if not (1 <= int(self.adc_bits) <= 16):
            raise ParameterError(f"adc_bits must be in [1, 16], got {self.adc_bits}")


@dataclass(frozen=True)
class NoiseSwitches:
    """Independent enables for each modeled imperfection."""

    intensity: bool = False
    electrical: bool = False
    drift: bool = False
    mismatch: bool = False
    bandwidth_limit: bool = False

    @classmethod
    def all_off(cls) -> "NoiseSwitches":
        return cls()

    @classmethod
    def all_on(cls) -> "NoiseSwitches":
        return cls(intensity=True, electrical=True, drift=True, mismatch=True)


@dataclass(frozen=True)
class TraceMetadata:
    source: str = "simulated"         # "simulated" or "ingested"
    config_digest: str = ""
    seed: int | None = None
    adc_bits: int = 0                 # 0 = not quantized / unknown
    fullscale: float = 1.0
    rejected_rows: int = 0            # non-finite rows dropped at ingest

    def __post_init__(self):
        if self.source not in ("simulated", "ingested"):
            raise ParameterError(f"unknown trace source {self.source!r}")
        if not (0 <= int(self.adc_bits) <= 16):
            raise ParameterError(f"adc_bits must be in [0, 16], got {self.adc_bits}")
        if not (self.fullscale > 0.0):
            raise ParameterError(f"fullscale must be positive, got {self.fullscale}")


@dataclass(frozen=True)
class IQTrace:
    """Time-aligned dual-channel voltage samples."""

    v_i: np.ndarray = field(repr=False)
    v_q: np.ndarray = field(repr=False)
    sample_rate: float
    metadata: TraceMetadata = TraceMetadata()
    clamped_samples: int = 0          # power draws clamped to zero during simulation

    def __post_init__(self):
        vi = np.asarray(self.v_i, dtype=np.float64)
        vq = np.asarray(self.v_q, dtype=np.float64)
        if vi.ndim != 1 or vq.ndim != 1 or vi.size == 0 or vi.size != vq.size:
            raise ParameterError("v_i and v_q must be non-empty 1-D arrays of equal length")
        if not (np.all(np.isfinite(vi)) and np.all(np.isfinite(vq))):
            raise ParameterError("trace samples must be finite")
        _check_positive("sample_rate", self.sample_rate)
        object.__setattr__(self, "v_i", vi)
        object.__setattr__(self, "v_q", vq)

    def __len__(self) -> int:
        return self.v_i.size


def bhd_amplitude(laser: LaserParams, ifm: InterferometerParams,
                  det: DetectorParams) -> float:
    """Nominal interference amplitude Z*R*P_0*sqrt(K*T*(1-T)) in volts.

    Maximized by a 50:50 input splitter; symmetric in T vs 1-T.
    """
    k = float(ifm.delay_loss)
    t = float(ifm.bs_transmittance)
    return (det.transimpedance * det.responsivity * laser.mean_power
            * np.sqrt(k * t * (1.0 - t)))


def additional_phase(i0: float, q0: float, i0_meas: float, q0_meas: float) -> float:
    """Systematic phase offset caused by unequal channel amplitudes.

    ``i0``/``q0`` are the design amplitudes, ``i0_meas``/``q0_meas`` the
    measured ones.  Returns arctan[(I0'*Q0 - I0*Q0') / (Q0*Q0' + I0'*I0)],
    positive exactly when I0'/Q0' > I0/Q0.
    """
    vals = {"i0": i0, "q0": q0, "i0_meas": i0_meas, "q0_meas": q0_meas}
    for name, value in vals.items():
        if not (np.isfinite(value) and value > 0.0):
            raise ParameterError(f"{name} must be positive, got {value}")
    num = i0_meas * q0 - i0 * q0_meas
    den = q0 * q0_meas + i0_meas * i0
    return float(np.arctan(num / den))


def mismatch_phase_error(phi, i0_meas: float, q0_meas: float):
    """Exact reconstruction error at true phase ``phi`` for unequal gains.

    With channel amplitudes I0', Q0' the measured phase is
    atan2(Q0'*sin(phi), I0'*cos(phi)); returns that minus ``phi``, wrapped.
    Zero exactly at phi in {0, +-pi/2, -pi} where one quadrature vanishes.
    """
    for name, value in (("i0_meas", i0_meas), ("q0_meas", q0_meas)):
        if not (np.isfinite(value) and value > 0.0):
            raise ParameterError(f"{name} must be positive, got {value}")
    arr = np.asarray(phi, dtype=np.float64)
    measured = np.arctan2(q0_meas * np.sin(arr), i0_meas * np.cos(arr))
    return wrap_phase(measured - arr) if arr.ndim else float(wrap_phase(measured - arr))


def simulate_trace(path: PhasePath, laser: LaserParams, ifm: InterferometerParams,
                   det_i: DetectorParams, det_q: DetectorParams,
                   switches: NoiseSwitches = NoiseSwitches(),
                   seed: int = 0) -> IQTrace:
    """Produce the I/Q voltage trace for a phase path.

    ``seed`` drives the noise draws only (the phase path carries its own);
    each noise source uses a distinct stream, so toggling one switch never
    changes another source's draws.  With ``switches.mismatch`` off the Q
    channel uses the I channel's gain (perfectly matched detectors) while
    keeping its own noise figure.  Negative instantaneous power draws are
    clamped to zero and counted in ``clamped_samples``.
    """
    count = len(path)
    seed = rng.check_seed(seed)
    total_phase = np.asarray(path.increments, dtype=np.float64)
    if switches.drift:
        if ifm.drift_mode == "slow-walk" and ifm.drift_step > 0.0:
            steps = rng.standard_normals(count, seed, _STREAM_DRIFT)
            steps *= ifm.drift_step
            drift = np.cumsum(steps)
            drift += ifm.drift_phase - drift[0]   # walk starts at drift_phase
            total_phase = total_phase + drift
        else:
            total_phase = total_phase + ifm.drift_phase
    total_phase = total_phase + ifm.static_phase

    k = float(ifm.delay_loss)
    t = float(ifm.bs_transmittance)
    p_sig = k * t * laser.mean_power
    p_lo = (1.0 - t) * laser.mean_power

    clamped = 0
    if switches.intensity and laser.intensity_sigma > 0.0:
        # The source power fluctuation epsilon(t) propagates through each
        # arm with that arm's transmission; the two arm draws are
        # independent but shared between the I and Q channels.
        eps_s = rng.standard_normals(count, seed, _STREAM_INTENSITY_S)
        eps_s *= k * t * laser.intensity_sigma
        eps_lo = rng.standard_normals(count, seed, _STREAM_INTENSITY_LO)
        eps_lo *= (1.0 - t) * laser.intensity_sigma
        p_sig = p_sig + eps_s
        p_lo = p_lo + eps_lo
        neg = (p_sig < 0.0) | (p_lo < 0.0)
        clamped = int(np.count_nonzero(neg))
        if clamped:
            p_sig = np.maximum(p_sig, 0.0)
            p_lo = np.maximum(p_lo, 0.0)
        envelope = np.sqrt(p_sig * p_lo)
    else:
        envelope = np.sqrt(p_sig * p_lo)

    gain_i = det_i.transimpedance * det_i.responsivity
    gain_q = (det_q.transimpedance * det_q.responsivity) if switches.mismatch else gain_i

    v_i = gain_i * envelope * np.cos(total_phase)
    v_q = gain_q * envelope * np.sin(total_phase)

    if switches.bandwidth_limit:
        dt = path.sample_period
        for arr, det in ((v_i, det_i), (v_q, det_q)):
            alpha = -np.expm1(-dt / det.response_time)
            arr[:] = lfilter([alpha], [1.0, alpha - 1.0], arr)

    if switches.electrical:
        if det_i.electrical_noise_sigma > 0.0:
            w1 = rng.standard_normals(count, seed, _STREAM_ELECTRICAL_I)
            v_i += det_i.electrical_noise_sigma * w1
        if det_q.electrical_noise_sigma > 0.0:
            w2 = rng.standard_normals(count, seed, _STREAM_ELECTRICAL_Q)
            v_q += det_q.electrical_noise_sigma * w2

    return IQTrace(v_i=v_i, v_q=v_q, sample_rate=1.0 / path.sample_period,
                   metadata=TraceMetadata(source="simulated", seed=seed),
                   clamped_samples=clamped)


def adc_quantize(trace: IQTrace, det_i: DetectorParams,
                 det_q: DetectorParams) -> IQTrace:
    """Snap each channel onto its ADC's mid-rise reconstruction levels.

    Models digitization of the voltages before phase reconstruction: 2^bits
    uniform levels across [-fullscale, +fullscale], saturating outside.
    """
    def snap(values: np.ndarray, det: DetectorParams) -> np.ndarray:
        levels = 1 << int(det.adc_bits)
        step = 2.0 * det.adc_fullscale / levels
        codes = np.floor((values + det.adc_fullscale) / step)
        np.clip(codes, 0, levels - 1, out=codes)
        return -det.adc_fullscale + (codes + 0.5) * step

    return replace(trace, v_i=snap(trace.v_i, det_i), v_q=snap(trace.v_q, det_q))


def boxcar_decimate(trace: IQTrace, factor: int) -> IQTrace:
    """Average non-overlapping windows of ``factor`` samples per channel.

    Models averaging acquisition (high-resolution mode) of a digitizer
    running ``factor`` times faster than the delivered sample rate.  A
    trailing partial window is dropped.
    """
    factor = int(factor)
    if factor < 1:
        raise ParameterError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return trace
    full = len(trace) // factor
    if full == 0:
        raise ParameterError(f"trace too short to decimate by {factor}")
    v_i = trace.v_i[:full * factor].reshape(full, factor).mean(axis=1)
    v_q = trace.v_q[:full * factor].reshape(full, factor).mean(axis=1)
    return replace(trace, v_i=v_i, v_q=v_q, sample_rate=trace.sample_rate / factor)


def validate_timing(laser: LaserParams, ifm: InterferometerParams,
                    det: DetectorParams, sample_rate: float) -> list[str]:
    """Advisory checks of the timing relations between device parameters.

    Returns messages prefixed "warning:" (detector too slow for the laser's
    coherence time; phase variance below the uniform-phase threshold of 10)
    or "note:" (the expected lag-1 correlation at this sample rate).
    """
    _check_positive("sample_rate", sample_rate)
    messages: list[str] = []
    if det.response_time >= laser.coherence_time:
        messages.append(
            f"warning: detector response time {det.response_time:g} s is not below "
            f"the coherence time {laser.coherence_time:g} s; the detector will "
            "average out the phase fluctuations")
    sigma_sq = phase_variance(ifm.delay_length, ifm.fiber_index, laser.coherence_time)
    if sigma_sq < 10.0:
        messages.append(
            f"warning: phase variance {sigma_sq:.3g} rad^2 is below 10; the wrapped "
            "phase will not be uniform")
    t_d = ifm.delay_time
    expected = max(0.0, 1.0 - (1.0 / sample_rate) / t_d)
    messages.append(
        f"note: expected lag-1 correlation of raw phase increments at "
        f"{sample_rate:g} Sa/s is {expected:.3f}")
    return messages


def timing_warnings(messages: list[str]) -> list[str]:
    """Filter validate_timing output down to the actual warnings."""
    return [m for m in messages if m.startswith("warning:")]
