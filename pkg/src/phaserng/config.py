"""Experiment configuration: strict INI parsing and content digests.

Grammar: INI sections ``[laser]``, ``[interferometer]``, ``[detector_i]``,
``[detector_q]``, ``[simulation]``, ``[analysis]``, ``[extraction]``,
``[test]``.  Keys are fixed per section; an unknown section or key is an
error (fail-fast against typos), as is a missing required key.  Values are
plain scalars; booleans accept on/off, true/false, yes/no, 1/0.  ``#`` and
``;`` start comments.  ``[detector_q]`` may be omitted to mirror
``[detector_i]``.

The digest is a sha256 over a canonical rendering of the *resolved*
configuration, so two files that spell the same experiment differently
(ordering, comments, defaults made explicit) share a digest.  Every
artifact the pipeline emits embeds this digest.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, fields

from .errors import FormatError, ParameterError
from .optics import DetectorParams, InterferometerParams, NoiseSwitches
from .phasenoise import LaserParams
from .stattests import TestConfig

_BOOL = {"on": True, "true": True, "yes": True, "1": True,
         "off": False, "false": False, "no": False, "0": False}


@dataclass(frozen=True)
class AnalysisParams:
    """Knobs for the reconstruction/analysis stage."""

    phase_bits: int = 10
    histogram_bins: int = 256
    max_lag: int = 50
    normalize: str = "percentile"     # or "arcsine-fit"

    def __post_init__(self):
        if not (1 <= int(self.phase_bits) <= 16):
            raise ParameterError(f"phase_bits must be in [1, 16], got {self.phase_bits}")
        if int(self.histogram_bins) < 2:
            raise ParameterError("histogram_bins must be >= 2")
        if int(self.max_lag) < 1:
            raise ParameterError("max_lag must be >= 1")
        if self.normalize not in ("percentile", "arcsine-fit"):
            raise ParameterError(f"unknown normalize method {self.normalize!r}")


@dataclass(frozen=True)
class ExtractionParams:
    """Toeplitz block geometry and seed sourcing."""

    input_bits: int = 4000
    output_bits: int = 0              # 0 = derive from rate/mode
    min_entropy_rate: float = 0.98
    epsilon_exponent: int = 50
    mode: str = "lemma"               # or "ratio"
    seed_file: str = ""

    def __post_init__(self):
        if int(self.input_bits) < 1:
            raise ParameterError("input_bits must be >= 1")
        if int(self.output_bits) < 0:
            raise ParameterError("output_bits must be >= 0")
        if not (0.0 < float(self.min_entropy_rate) <= 1.0):
            raise ParameterError("min_entropy_rate must be in (0, 1]")
        if int(self.epsilon_exponent) < 1:
            raise ParameterError("epsilon_exponent must be >= 1")
        if self.mode not in ("lemma", "ratio"):
            raise ParameterError(f"unknown extraction mode {self.mode!r}")


@dataclass(frozen=True)
class SimulationParams:
    """Sample geometry, seeding, and model switches."""

    sample_count: int
    sample_rate: float
    seed: int
    switches: NoiseSwitches = NoiseSwitches()
    adc_quantize: bool = False
    oversample_factor: int = 1        # detector-averaging acquisition model

    def __post_init__(self):
        if int(self.sample_count) < 1:
            raise ParameterError("sample_count must be >= 1")
        if not (self.sample_rate > 0.0):
            raise ParameterError("sample_rate must be positive")
        if int(self.oversample_factor) < 1:
            raise ParameterError("oversample_factor must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    laser: LaserParams
    interferometer: InterferometerParams
    detector_i: DetectorParams
    detector_q: DetectorParams
    simulation: SimulationParams
    analysis: AnalysisParams = AnalysisParams()
    extraction: ExtractionParams = ExtractionParams()
    test: TestConfig = TestConfig(sequence_bits=1_000_000, sequence_count=100)

    def canonical_text(self) -> str:
        """Deterministic rendering of every resolved field."""
        out = io.StringIO()

        def block(name, obj, skip=()):
            out.write(f"[{name}]\n")
            for f in fields(obj):
                if f.name in skip:
                    continue
                out.write(f"{f.name} = {getattr(obj, f.name)!r}\n")

        block("laser", self.laser)
        block("interferometer", self.interferometer)
        block("detector_i", self.detector_i)
        block("detector_q", self.detector_q)
        block("simulation", self.simulation, skip=("switches",))
        block("switches", self.simulation.switches)
        block("analysis", self.analysis)
        block("extraction", self.extraction)
        block("test", self.test)
        return out.getvalue()

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


class _Section:
    """One INI section with consumption tracking for unknown-key errors."""

    def __init__(self, name: str, raw: dict[str, str]):
        self.name = name
        self.raw = dict(raw)
        self.seen: set[str] = set()

    def get(self, key, default=None, *, required=False, conv=str):
        if key not in self.raw:
            if required:
                raise FormatError(f"[{self.name}] is missing required key {key!r}")
            return default
        self.seen.add(key)
        text = self.raw[key].strip()
        try:
            if conv is bool:
                return _BOOL[text.lower()]
            return conv(text)
        except (KeyError, ValueError):
            raise FormatError(
                f"[{self.name}] key {key!r}: cannot parse {text!r}") from None

    def finish(self):
        unknown = sorted(set(self.raw) - self.seen)
        if unknown:
            raise FormatError(f"[{self.name}] has unknown keys: {', '.join(unknown)}")


_KNOWN_SECTIONS = ("laser", "interferometer", "detector_i", "detector_q",
                   "simulation", "analysis", "extraction", "test")


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise FormatError(f"config syntax error: {exc}") from None
    unknown = sorted(set(parser.sections()) - set(_KNOWN_SECTIONS))
    if unknown:
        raise FormatError(f"unknown config sections: {', '.join(unknown)}")

    def section(name):
        return _Section(name, dict(parser[name]) if parser.has_section(name) else {})

    sec = section("laser")
    laser = LaserParams(
        linewidth=sec.get("linewidth", 0.0, conv=float),
        coherence_time=sec.get("coherence_time", 0.0, conv=float),
        mean_power=sec.get("mean_power", 1.0, conv=float),
        intensity_sigma=sec.get("intensity_sigma", 0.0, conv=float))
    sec.finish()

    sec = section("interferometer")
    ifm = InterferometerParams(
        delay_length=sec.get("delay_length", required=True, conv=float),
        fiber_index=sec.get("fiber_index", 1.5, conv=float),
        delay_loss=sec.get("delay_loss", 1.0, conv=float),
        bs_transmittance=sec.get("bs_transmittance", 0.5, conv=float),
        static_phase=sec.get("static_phase", 0.0, conv=float),
        drift_phase=sec.get("drift_phase", 0.0, conv=float),
        drift_mode=sec.get("drift_mode", "fixed"),
        drift_step=sec.get("drift_step", 0.0, conv=float))
    sec.finish()

    def detector(name, fallback=None):
        sec = section(name)
        if not sec.raw and fallback is not None:
            return fallback
        det = DetectorParams(
            transimpedance=sec.get("transimpedance", required=True, conv=float),
            responsivity=sec.get("responsivity", 1.0, conv=float),
            electrical_noise_sigma=sec.get("electrical_noise_sigma", 0.0, conv=float),
            response_time=sec.get("response_time", 625e-12, conv=float),
            adc_bits=sec.get("adc_bits", 10, conv=int),
            adc_fullscale=sec.get("adc_fullscale", 1.0, conv=float))
        sec.finish()
        return det

    det_i = detector("detector_i")
    det_q = detector("detector_q", fallback=det_i)

    sec = section("simulation")
    switches = NoiseSwitches(
        intensity=sec.get("noise_intensity", False, conv=bool),
        electrical=sec.get("noise_electrical", False, conv=bool),
        drift=sec.get("noise_drift", False, conv=bool),
        mismatch=sec.get("noise_mismatch", False, conv=bool),
        bandwidth_limit=sec.get("noise_bandwidth_limit", False, conv=bool))
    sim = SimulationParams(
        sample_count=sec.get("sample_count", required=True, conv=int),
        sample_rate=sec.get("sample_rate", required=True, conv=float),
        seed=sec.get("seed", required=True, conv=int),
        switches=switches,
        adc_quantize=sec.get("adc_quantize", False, conv=bool),
        oversample_factor=sec.get("oversample_factor", 1, conv=int))
    sec.finish()

    sec = section("analysis")
    analysis = AnalysisParams(
        phase_bits=sec.get("phase_bits", 10, conv=int),
        histogram_bins=sec.get("histogram_bins", 256, conv=int),
        max_lag=sec.get("max_lag", 50, conv=int),
        normalize=sec.get("normalize", "percentile"))
    sec.finish()

    sec = section("extraction")
    extraction = ExtractionParams(
        input_bits=sec.get("input_bits", 4000, conv=int),
        output_bits=sec.get("output_bits", 0, conv=int),
        min_entropy_rate=sec.get("min_entropy_rate", 0.98, conv=float),
        epsilon_exponent=sec.get("epsilon_exponent", 50, conv=int),
        mode=sec.get("mode", "lemma"),
        seed_file=sec.get("seed_file", ""))
    sec.finish()

    sec = section("test")
    test = TestConfig(
        sequence_bits=sec.get("sequence_bits", 1_000_000, conv=int),
        sequence_count=sec.get("sequence_count", 100, conv=int),
        alpha=sec.get("alpha", 0.01, conv=float),
        block_frequency_block=sec.get("block_frequency_block", 128, conv=int),
        serial_pattern_bits=sec.get("serial_pattern_bits", 16, conv=int),
        approx_entropy_pattern_bits=sec.get("approx_entropy_pattern_bits", 10, conv=int),
        proportion_mode=sec.get("proportion_mode", "statistical"),
        fixed_proportion=sec.get("fixed_proportion", 0.98, conv=float),
        uniformity_threshold=sec.get("uniformity_threshold", 1e-4, conv=float))
    sec.finish()

    return ExperimentConfig(laser=laser, interferometer=ifm, detector_i=det_i,
                            detector_q=det_q, simulation=sim, analysis=analysis,
                            extraction=extraction, test=test)


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
