"""Experiment orchestration: stages, artifact files, and the run summary.

Stages communicate only through files in the output directory, so any
stage can run in a later invocation as long as its inputs exist; a missing
input is a dependency error naming the expected artifact.  Every artifact
embeds (or, for binary payloads, is paired with a sidecar that embeds) the
configuration digest, and the summary cross-references them all with
content hashes.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import replace

import numpy as np

from . import analysis, extractor, optics, phasenoise, reconstruction, stattests, traceio
from .config import ExperimentConfig
from .errors import DependencyError, InsufficientInputError, ParameterError

STAGES = ("simulate", "ingest", "reconstruct", "analyze", "extract", "test")

ARTIFACTS = {
    "trace": "trace.iqt",
    "phases": "phases.csv",
    "hist_i": "hist_channel_i.csv",
    "hist_q": "hist_channel_q.csv",
    "hist_phase": "hist_phase.csv",
    "hist_symbols": "hist_symbols.csv",
    "analysis": "analysis_report.json",
    "seed": "toeplitz_seed.bin",
    "extracted": "extracted.bin",
    "test": "test_report.json",
    "summary": "summary.json",
}

#: RNG stream for a generated extractor seed (simulation uses streams 0-5).
EXTRACTOR_SEED_STREAM = 100

SCHEMA_VERSION = 1


def _path(outdir: str, key: str) -> str:
    return os.path.join(outdir, ARTIFACTS[key])


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _require_artifact(outdir: str, key: str, stage: str) -> str:
    path = _path(outdir, key)
    if not os.path.exists(path):
        raise DependencyError(
            f"stage {stage!r} requires missing artifact {ARTIFACTS[key]!r} "
            f"(run its producing stage first)")
    return path


def _write_json(path: str, payload: dict) -> None:
    traceio.atomic_write_bytes(path, (json.dumps(payload, indent=2) + "\n").encode())


def _write_sidecar(path: str, digest: str) -> None:
    _write_json(path + ".meta.json", {
        "schema_version": SCHEMA_VERSION,
        "artifact": os.path.basename(path),
        "config_digest": digest,
        "sha256": _sha256_file(path),
    })


def _write_hist_csv(path: str, hist: analysis.Histogram, ref, digest: str) -> None:
    """CSV columns: bin center, count, reference density (blank if none)."""
    centers = 0.5 * (hist.bin_edges[:-1] + hist.bin_edges[1:])
    density = analysis.reference_pdf(ref, centers) if ref is not None else None
    lines = [f"# config_digest={digest}", "bin_center,count,reference_density"]
    for k, c in enumerate(centers):
        d = "" if density is None else repr(float(density[k]))
        lines.append(f"{float(c)!r},{int(hist.counts[k])},{d}")
    traceio.atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def simulate_stage(cfg: ExperimentConfig, outdir: str) -> dict:
    sim = cfg.simulation
    factor = sim.oversample_factor
    fine_rate = sim.sample_rate * factor
    fine_count = sim.sample_count * factor
    path = phasenoise.sample_phase_path(
        cfg.laser, cfg.interferometer.delay_time, 1.0 / fine_rate,
        fine_count, seed=sim.seed)
    trace = optics.simulate_trace(path, cfg.laser, cfg.interferometer,
                                  cfg.detector_i, cfg.detector_q,
                                  switches=sim.switches, seed=sim.seed)
    if factor > 1:
        trace = optics.boxcar_decimate(trace, factor)
    if sim.adc_quantize:
        trace = optics.adc_quantize(trace, cfg.detector_i, cfg.detector_q)
        meta = replace(trace.metadata, config_digest=cfg.digest,
                       adc_bits=cfg.detector_i.adc_bits,
                       fullscale=cfg.detector_i.adc_fullscale)
    else:
        meta = replace(trace.metadata, config_digest=cfg.digest)
    trace = replace(trace, metadata=meta)
    out = _path(outdir, "trace")
    traceio.write_trace_binary(trace, out)
    _write_sidecar(out, cfg.digest)
    return {"samples": len(trace), "sample_rate": trace.sample_rate,
            "clamped_samples": trace.clamped_samples,
            "oversample_factor": factor}


def ingest_stage(cfg: ExperimentConfig, outdir: str, input_path: str,
                 input_format: str = "binary") -> dict:
    if input_path is None:
        raise ParameterError("ingest stage needs an input capture path")
    trace = traceio.ingest_trace(input_path, fmt=input_format,
                                 sample_rate=cfg.simulation.sample_rate)
    trace = replace(trace, metadata=replace(trace.metadata, config_digest=cfg.digest))
    out = _path(outdir, "trace")
    traceio.write_trace_binary(trace, out)
    _write_sidecar(out, cfg.digest)
    return {"samples": len(trace), "sample_rate": trace.sample_rate,
            "rejected_rows": trace.metadata.rejected_rows}


def reconstruct_stage(cfg: ExperimentConfig, outdir: str) -> dict:
    trace = traceio.read_trace_binary(_require_artifact(outdir, "trace", "reconstruct"))
    norm = reconstruction.normalize_iq(trace, method=cfg.analysis.normalize)
    series = reconstruction.reconstruct_phase(norm.trace)
    symbols = reconstruction.quantize_phase(series, cfg.analysis.phase_bits)
    lines = [f"# config_digest={cfg.digest}",
             f"# source_digest={series.source_digest}",
             f"# bits_per_symbol={symbols.bits_per_symbol}",
             "phase,symbol"]
    lines.extend(f"{p!r},{s}" for p, s in
                 zip(series.phases.tolist(), symbols.symbols.tolist()))
    traceio.atomic_write_bytes(_path(outdir, "phases"),
                               ("\n".join(lines) + "\n").encode())
    return {"samples": len(series), "zero_vectors": series.zero_vector_count,
            "amplitude_i": norm.amplitude_i, "amplitude_q": norm.amplitude_q}


def _read_phases(outdir: str, stage: str):
    path = _require_artifact(outdir, "phases", stage)
    phases, symbols = [], []
    bits_per_symbol = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("# bits_per_symbol="):
                bits_per_symbol = int(line.split("=", 1)[1])
            if not line or line.startswith("#") or line == "phase,symbol":
                continue
            p, s = line.split(",")
            phases.append(float(p))
            symbols.append(int(s))
    if bits_per_symbol is None:
        raise DependencyError(f"{path!r} lacks the bits_per_symbol header")
    series = reconstruction.PhaseSeries(phases=np.asarray(phases))
    stream = reconstruction.SymbolStream(
        symbols=np.asarray(symbols, dtype=np.uint16),
        bits_per_symbol=bits_per_symbol)
    return series, stream


def analyze_stage(cfg: ExperimentConfig, outdir: str) -> dict:
    trace = traceio.read_trace_binary(_require_artifact(outdir, "trace", "analyze"))
    series, symbols = _read_phases(outdir, "analyze")
    bins = cfg.analysis.histogram_bins
    digest = cfg.digest

    norm = reconstruction.normalize_iq(trace, method=cfg.analysis.normalize)
    adc_bits = cfg.detector_i.adc_bits
    code_i = reconstruction.quantize_uniform(norm.trace.v_i, adc_bits, -1.0, 1.0)
    code_q = reconstruction.quantize_uniform(norm.trace.v_q, adc_bits, -1.0, 1.0)
    hmin_i = analysis.min_entropy(analysis.symbol_counts(code_i, 1 << adc_bits))
    hmin_q = analysis.min_entropy(analysis.symbol_counts(code_q, 1 << adc_bits))
    hmin_phase = analysis.min_entropy(
        analysis.symbol_counts(symbols.symbols, 1 << symbols.bits_per_symbol))

    hist_i = analysis.Histogram.from_data(norm.trace.v_i, bins, (-1.1, 1.1))
    hist_q = analysis.Histogram.from_data(norm.trace.v_q, bins, (-1.1, 1.1))
    hist_phase = analysis.Histogram.from_data(series.phases, bins, (-np.pi, np.pi))
    sym_counts = analysis.symbol_counts(symbols.symbols, 1 << symbols.bits_per_symbol)
    hist_symbols = analysis.Histogram(
        bin_edges=np.arange((1 << symbols.bits_per_symbol) + 1, dtype=np.float64),
        counts=sym_counts, total=int(sym_counts.sum()))

    arc = analysis.ReferenceLaw.arcsine(1.0)
    _write_hist_csv(_path(outdir, "hist_i"), hist_i, arc, digest)
    _write_hist_csv(_path(outdir, "hist_q"), hist_q, arc, digest)
    _write_hist_csv(_path(outdir, "hist_phase"), hist_phase,
                    analysis.ReferenceLaw.uniform(-np.pi, np.pi), digest)
    _write_hist_csv(_path(outdir, "hist_symbols"), hist_symbols, None, digest)

    klds = {
        "vs_standard_gaussian": analysis.kld(hist_phase,
                                             analysis.ReferenceLaw.gaussian(0.0, 1.0)),
        "vs_moment_fit_gaussian": analysis.kld(hist_phase,
                                               analysis.ReferenceLaw.gaussian_fit(series.phases)),
        "vs_uniform": analysis.kld(hist_phase,
                                   analysis.ReferenceLaw.uniform(-np.pi, np.pi)),
    }
    autocorr = analysis.autocorrelation(series.phases, cfg.analysis.max_lag)
    warnings = optics.validate_timing(cfg.laser, cfg.interferometer,
                                      cfg.detector_i, cfg.simulation.sample_rate)
    report = {
        "schema_version": SCHEMA_VERSION,
        "config_digest": digest,
        "samples": len(series),
        "min_entropy_bits": {"channel_i": hmin_i, "channel_q": hmin_q,
                             "phase_symbols": hmin_phase},
        "kld_bits": klds,
        "autocorrelation": [float(x) for x in autocorr],
        "zero_vectors": series.zero_vector_count,
        "timing_messages": warnings,
    }
    _write_json(_path(outdir, "analysis"), report)
    return {"min_entropy_bits": report["min_entropy_bits"], "kld_bits": klds}


def _extraction_spec(cfg: ExperimentConfig, outdir: str) -> extractor.ToeplitzSpec:
    ext = cfg.extraction
    n = ext.input_bits
    if ext.output_bits:
        n, m = n, ext.output_bits
    else:
        n, m = extractor.derive_params(ext.min_entropy_rate, n,
                                       epsilon=2.0 ** -ext.epsilon_exponent,
                                       mode=ext.mode)
    if ext.seed_file:
        return extractor.read_seed_file(ext.seed_file, n, m)
    spec = extractor.ToeplitzSpec.from_rng(n, m, seed=cfg.simulation.seed,
                                           stream=EXTRACTOR_SEED_STREAM)
    seed_path = _path(outdir, "seed")
    traceio.atomic_write_bytes(seed_path,
                               np.packbits(spec.seed_bits).tobytes())
    _write_sidecar(seed_path, cfg.digest)
    return spec


def extract_stage(cfg: ExperimentConfig, outdir: str) -> dict:
    _, symbols = _read_phases(outdir, "extract")
    spec = _extraction_spec(cfg, outdir)
    raw_bits = extractor.symbols_to_bits(symbols)
    result = extractor.extract(raw_bits, spec)
    out = _path(outdir, "extracted")
    traceio.atomic_write_bytes(out, result.bits.data)
    _write_sidecar(out, cfg.digest)
    return {"input_bits": raw_bits.bit_length,
            "output_bits": result.bits.bit_length,
            "blocks": result.blocks, "discarded_bits": result.discarded_bits,
            "n": spec.input_block_bits, "m": spec.output_block_bits}


def test_stage(cfg: ExperimentConfig, outdir: str) -> dict:
    path = _require_artifact(outdir, "extracted", "test")
    raw = open(path, "rb").read()
    tc = cfg.test
    need = tc.sequence_bits * tc.sequence_count
    have = len(raw) * 8
    if have < need:
        raise InsufficientInputError(
            f"test stage needs {need} extracted bits, found {have}")
    all_bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:need]
    sequences = all_bits.reshape(tc.sequence_count, tc.sequence_bits)
    report = stattests.run_battery(list(sequences), tc)
    payload = report.to_dict()
    payload["config_digest"] = cfg.digest
    _write_json(_path(outdir, "test"), payload)
    return {"passed": report.passed,
            "proportions": {r.name: r.proportion for r in report.results}}


def run_pipeline(cfg: ExperimentConfig, stages, outdir: str,
                 ingest_path: str | None = None,
                 ingest_format: str = "binary") -> dict:
    """Run the requested stages in canonical order and write the summary."""
    requested = list(stages)
    unknown = sorted(set(requested) - set(STAGES))
    if unknown:
        raise ParameterError(f"unknown stages: {', '.join(unknown)}")
    if "simulate" in requested and "ingest" in requested:
        raise ParameterError("choose one trace source: simulate or ingest")
    os.makedirs(outdir, exist_ok=True)

    stage_outputs: dict[str, dict] = {}
    for stage in STAGES:
        if stage not in requested:
            continue
        if stage == "simulate":
            stage_outputs[stage] = simulate_stage(cfg, outdir)
        elif stage == "ingest":
            stage_outputs[stage] = ingest_stage(cfg, outdir, ingest_path, ingest_format)
        elif stage == "reconstruct":
            stage_outputs[stage] = reconstruct_stage(cfg, outdir)
        elif stage == "analyze":
            stage_outputs[stage] = analyze_stage(cfg, outdir)
        elif stage == "extract":
            stage_outputs[stage] = extract_stage(cfg, outdir)
        elif stage == "test":
            stage_outputs[stage] = test_stage(cfg, outdir)

    ext = stage_outputs.get("extract")
    if ext is not None:
        rate_per_sample = (ext["m"] / ext["n"]) * cfg.analysis.phase_bits
    else:
        e = cfg.extraction
        if e.output_bits:
            rate_per_sample = (e.output_bits / e.input_bits) * cfg.analysis.phase_bits
        else:
            rate_per_sample = None
    artifacts = {}
    for key, name in ARTIFACTS.items():
        path = os.path.join(outdir, name)
        if key != "summary" and os.path.exists(path):
            artifacts[name] = {"sha256": _sha256_file(path),
                               "config_digest": cfg.digest}
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config_digest": cfg.digest,
        "stages": [s for s in STAGES if s in requested],
        "stage_outputs": stage_outputs,
        "artifacts": artifacts,
    }
    if rate_per_sample is not None:
        summary["bits_per_sample"] = rate_per_sample
        summary["nominal_bit_rate"] = rate_per_sample * cfg.simulation.sample_rate
    _write_json(_path(outdir, "summary"), summary)
    return summary
