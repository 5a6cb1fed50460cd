"""
Pipeline orchestration: build the chain, pick the initial state, evaluate the
correlators and the protocol, and write the result bundle.
"""
import csv
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from config import settings
from models import ExperimentConfig, MonteCarloSpec, PeakMatchReport, RunManifest, ScenarioKind
from simulator import mc_f_s, mc_homodyne
from .correlators import CorrelatorSeries, eigen_support, f_m_series, f_s_series, probe_moments_series
from .gaussian import noise_series, run_protocol, signal_to_noise, subtract_noise, variance_series
from .probe import EigenbasisProbe, ProbeObservable, build_probe, probe_in_eigenbasis
from .spectra import (
    Spectrum,
    StickLine,
    dft,
    match_peaks,
    peaks,
    stick_cm,
    stick_cs,
    time_grid,
)
from .spinchain import (
    ManyBodyState,
    SpectralDecomposition,
    build_hamiltonian,
    diagonalize,
    ground_state,
    singlet_product_state,
)

logger = logging.getLogger(__name__)

SERIES_FILE = "series.csv"
SPECTRUM_FILE = "spectrum.csv"
STICKS_FILE = "sticks.csv"
MC_FILE = "mc.csv"
MC_VALIDATE_FILE = "mc_validate.csv"
MANIFEST_FILE = "manifest.json"

MC_Z_LIMIT = 3.0


def fmt(value: Optional[float]) -> str:
    """Round-trip decimal representation."""
    if value is None:
        return ""
    return f"{float(value):.17g}"


@dataclass
class RunContext:
    config: ExperimentConfig
    decomp: SpectralDecomposition
    state: ManyBodyState
    observable: ProbeObservable
    j_eigen: EigenbasisProbe
    times: np.ndarray
    reference_is_eigenstate: bool


@dataclass
class SpectralResults:
    f_s: CorrelatorSeries
    f_m: CorrelatorSeries
    c_s: Spectrum
    c_m: Spectrum
    sticks_s: List[StickLine]
    sticks_m: List[StickLine]
    level_gaps: np.ndarray
    peak_match: PeakMatchReport


def initial_state(config: ExperimentConfig, decomp: SpectralDecomposition) -> ManyBodyState:
    """Ground state for equilibrium runs; the pre-quench ground state otherwise."""
    if config.scenario.kind is ScenarioKind.EQUILIBRIUM:
        return ground_state(config.chain, decomp)
    initial = config.initial_chain
    if initial.g2 == 0.0 and initial.g1 > 0.0:
        logger.info("Quench from the singlet product state")
        return singlet_product_state(initial.n_sites)
    logger.info("Quench from the ground state of g1=%.6g, g2=%.6g", initial.g1, initial.g2)
    return ground_state(initial)


def prepare(config: ExperimentConfig) -> RunContext:
    started = time.perf_counter()
    hamiltonian = build_hamiltonian(config.chain)
    decomp = diagonalize(hamiltonian)
    logger.info(
        "Diagonalized %d-site chain (dim %d, %s) in %.2fs; E0=%.12g, gap=%.6g",
        config.chain.n_sites, decomp.dim, "block-wise" if decomp.block_wise else "dense",
        time.perf_counter() - started, decomp.ground_energy,
        float(decomp.eigenvalues[1] - decomp.eigenvalues[0]),
    )
    state = initial_state(config, decomp)
    observable = build_probe(config.probe)
    quench = config.scenario.kind is ScenarioKind.QUENCH
    times = time_grid(config.grid.t_max, config.grid.n_samples, two_sided=quench)
    return RunContext(
        config=config,
        decomp=decomp,
        state=state,
        observable=observable,
        j_eigen=probe_in_eigenbasis(observable, decomp, state),
        times=times,
        reference_is_eigenstate=not quench,
    )


def level_gaps(decomp: SpectralDecomposition) -> np.ndarray:
    """Distinct E_n - E_0 above the merge tolerance."""
    gaps = np.sort(decomp.eigenvalues - decomp.ground_energy)
    gaps = gaps[gaps > settings.GAP_MERGE_TOL]
    if gaps.size == 0:
        return gaps
    keep = np.concatenate([[True], np.diff(gaps) > settings.GAP_MERGE_TOL])
    return gaps[keep]


def transition_frequencies(context: RunContext) -> np.ndarray:
    """Positive E_m - E_n among the eigenstates populated by psi and J psi."""
    decomp = context.decomp
    psi = decomp.to_eigenbasis(context.state.amplitudes)
    phi = context.j_eigen @ psi
    support = np.union1d(eigen_support(psi), eigen_support(phi))
    energies = np.unique(np.round(decomp.eigenvalues[support], 12))
    frequencies = (energies[None, :] - energies[:, None]).ravel()
    return np.unique(np.round(frequencies[frequencies > settings.GAP_MERGE_TOL], 12))


def compute_spectra(context: RunContext) -> SpectralResults:
    config, decomp, state, observable = context.config, context.decomp, context.state, context.observable
    j_eigen = context.j_eigen
    f_s = f_s_series(state, decomp, observable, context.times, j_eigen)
    f_m = f_m_series(state, decomp, observable, context.times, j_eigen)
    c_s = dft(f_s, config.grid.window)
    c_m = dft(f_m, config.grid.window)

    sticks_s = stick_cs(decomp, observable, state, j_eigen)
    sticks_m = stick_cm(decomp, observable) if context.reference_is_eigenstate else []
    gaps = level_gaps(decomp)

    detected = peaks(
        c_m,
        rel_threshold=config.grid.rel_threshold,
        omega_min=config.grid.omega_min_factor * c_m.resolution,
    )
    reference = gaps if context.reference_is_eigenstate else transition_frequencies(context)
    report = match_peaks(detected, reference, tol=c_m.resolution, resolution=c_m.resolution)
    if not report.all_matched:
        logger.warning("Unmatched C_M peaks at %s", ", ".join(f"{w:.4g}" for w in report.unmatched))
    return SpectralResults(
        f_s=f_s, f_m=f_m, c_s=c_s, c_m=c_m,
        sticks_s=sticks_s, sticks_m=sticks_m, level_gaps=gaps, peak_match=report,
    )


def storage_ok(config: ExperimentConfig) -> bool:
    limit = config.protocol.storage_time
    if limit is not None and config.grid.t_max > limit:
        logger.warning(
            "Time grid reaches %.4g/g but the memory stores for %.4g/g (%.4g ms)",
            config.grid.t_max, limit, limit * config.protocol.g_inverse_ms,
        )
        return False
    return True


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    logger.info("Wrote %s", path)


def write_spectrum(path: Path, results: SpectralResults) -> None:
    rows = (
        (fmt(omega), fmt(c_s), fmt(c_m))
        for omega, c_s, c_m in zip(results.c_m.omegas, results.c_s.amplitudes, results.c_m.amplitudes)
    )
    _write_rows(path, ("omega", "C_S", "C_M"), rows)


def write_sticks(path: Path, results: SpectralResults, reference_is_eigenstate: bool) -> None:
    """Every distinct level gap (C_M weight, or kind 'level' off equilibrium) plus the C_S lines."""
    rows = []
    for gap in results.level_gaps:
        if reference_is_eigenstate:
            weight = sum(line.weight for line in results.sticks_m
                         if abs(line.omega - gap) <= settings.GAP_MERGE_TOL)
            rows.append((fmt(gap), fmt(weight), "C_M"))
        else:
            rows.append((fmt(gap), fmt(0.0), "level"))
    for line in results.sticks_s:
        rows.append((fmt(line.omega), fmt(line.weight), "C_S"))
    _write_rows(path, ("gap", "xi", "kind"), rows)


def write_manifest(path: Path, manifest: RunManifest) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(manifest.to_dict(), handle, indent=2)
        handle.write("\n")
    logger.info("Wrote %s", path)


def _thinned(times: np.ndarray, points: int) -> np.ndarray:
    """Up to ``points`` evenly spaced grid times with t >= 0."""
    candidates = times[times >= 0.0]
    picks = np.unique(np.round(np.linspace(0, candidates.size - 1, points)).astype(int))
    return candidates[picks]


def _manifest(
    context: RunContext,
    command: str,
    started: float,
    outputs: List[str],
    results: Optional[SpectralResults] = None,
    **extra,
) -> RunManifest:
    config, decomp = context.config, context.decomp
    energies = decomp.eigenvalues
    metadata = context.state.metadata
    degenerate = bool(metadata.get("degenerate", False)) if context.reference_is_eigenstate else False
    variance_ratio = None
    if results is not None:
        denominator = results.f_s.sample_variance()
        variance_ratio = results.f_m.sample_variance() / denominator if denominator > 0 else None
    return RunManifest(
        app=settings.APP_NAME,
        version=settings.VERSION,
        command=command,
        wall_clock_sec=time.perf_counter() - started,
        seed=config.mc.seed if config.mc else None,
        config=config.model_dump(mode="json"),
        eigenvalues=[float(e) for e in energies],
        ground_energy=float(energies[0]),
        gap=float(energies[1] - energies[0]),
        degenerate=degenerate,
        diagonalization="block-wise" if decomp.block_wise else "dense",
        signal_scale=config.protocol.signal_scale,
        noise=signal_to_noise(config.protocol, results.f_m.values if results else np.zeros(0)),
        storage_ok=storage_ok(config),
        time_unit_ms=config.protocol.g_inverse_ms,
        variance_ratio=variance_ratio,
        peak_match=results.peak_match if results else None,
        outputs=outputs,
        **extra,
    )


def protocol_series(context: RunContext, f_m: CorrelatorSeries) -> dict:
    """Measured variance, noise eta(t) and the recovered F_M on the run grid."""
    params = context.config.protocol
    times = context.times
    forms = [run_protocol(params, float(t)) for t in times]
    breakdowns = variance_series(forms, context.state, context.decomp, context.observable,
                                 context.j_eigen)
    total = np.array([b.total for b in breakdowns])
    _, var_jt = probe_moments_series(context.state, context.decomp, context.observable, times,
                                     context.j_eigen)
    _, var_j0 = probe_moments_series(context.state, context.decomp, context.observable, [0.0],
                                     context.j_eigen)
    eta = noise_series(params, var_jt, float(var_j0[0]))
    recovered = subtract_noise(total, var_jt, float(var_j0[0]), params)
    expected = f_m.values if params.compensate_loss else params.signal_scale * f_m.values
    deviation = float(np.max(np.abs(recovered - expected))) if recovered.size else 0.0
    logger.info("Recovered F_M deviates from sqrt(eta_mem) F_M by at most %.3e", deviation)
    return {"variance_total": total, "eta": eta, "F_M_recovered": recovered}


def mc_error_bars(context: RunContext, total_exact: np.ndarray) -> List[Sequence[str]]:
    mc = context.config.mc
    rows = []
    for stream, t in enumerate(_thinned(context.times, mc.points)):
        estimate = mc_homodyne(context.config.protocol, context.state, context.decomp,
                               context.observable, float(t), mc.shots, mc.seed, stream)
        exact = float(total_exact[np.flatnonzero(context.times == t)[0]])
        z = estimate.z_score(exact)
        if abs(z) > MC_Z_LIMIT:
            logger.warning("Homodyne MC at t=%.4g is %.1f standard errors off", t, z)
        rows.append((fmt(t), fmt(estimate.estimate), fmt(estimate.standard_error), fmt(exact), fmt(z)))
    return rows


def run(config: ExperimentConfig, command: str = "run") -> RunManifest:
    """Full pipeline: correlators, protocol variance, spectra, sticks and optional MC."""
    started = time.perf_counter()
    out_dir = Path(config.outputs)
    out_dir.mkdir(parents=True, exist_ok=True)

    context = prepare(config)
    results = compute_spectra(context)
    protocol = protocol_series(context, results.f_m)

    outputs = [SERIES_FILE, SPECTRUM_FILE, STICKS_FILE]
    columns = (results.f_s.values, results.f_m.values, protocol["variance_total"],
               protocol["eta"], protocol["F_M_recovered"])
    series_rows = (
        tuple(fmt(v) for v in (t, *row)) for t, *row in zip(context.times, *columns)
    )
    _write_rows(out_dir / SERIES_FILE,
                ("t", "F_S", "F_M", "variance_total", "eta", "F_M_recovered"), series_rows)
    write_spectrum(out_dir / SPECTRUM_FILE, results)
    write_sticks(out_dir / STICKS_FILE, results, context.reference_is_eigenstate)

    if config.mc is not None:
        rows = mc_error_bars(context, protocol["variance_total"])
        _write_rows(out_dir / MC_FILE,
                    ("t", "variance_mc", "standard_error", "variance_exact", "z_score"), rows)
        outputs.append(MC_FILE)

    outputs.append(MANIFEST_FILE)
    manifest = _manifest(context, command, started, outputs, results)
    write_manifest(out_dir / MANIFEST_FILE, manifest)
    logger.info("Run finished in %.2fs: %s", manifest.wall_clock_sec, results.peak_match.summary())
    return manifest


def spectrum_only(config: ExperimentConfig, command: str = "spectrum-only") -> RunManifest:
    """Correlators and spectra without the protocol variance or Monte Carlo."""
    started = time.perf_counter()
    out_dir = Path(config.outputs)
    out_dir.mkdir(parents=True, exist_ok=True)

    context = prepare(config)
    results = compute_spectra(context)
    write_spectrum(out_dir / SPECTRUM_FILE, results)
    write_sticks(out_dir / STICKS_FILE, results, context.reference_is_eigenstate)
    outputs = [SPECTRUM_FILE, STICKS_FILE, MANIFEST_FILE]
    manifest = _manifest(context, command, started, outputs, results)
    write_manifest(out_dir / MANIFEST_FILE, manifest)
    return manifest


def mc_validate(config: ExperimentConfig, command: str = "mc-validate") -> RunManifest:
    """Monte Carlo oracles for the homodyne variance and F_S at thinned times."""
    if config.mc is None:
        config = config.model_copy(update={"mc": MonteCarloSpec()})
    started = time.perf_counter()
    out_dir = Path(config.outputs)
    out_dir.mkdir(parents=True, exist_ok=True)

    context = prepare(config)
    mc = config.mc
    times = _thinned(context.times, mc.points)
    forms = [run_protocol(config.protocol, float(t)) for t in times]
    exact_variance = [b.total for b in variance_series(forms, context.state, context.decomp,
                                                       context.observable, context.j_eigen)]
    exact_f_s = f_s_series(context.state, context.decomp, context.observable, times,
                           context.j_eigen).values

    rows = []
    worst = 0.0
    for stream, t in enumerate(times):
        checks = (
            ("variance", mc_homodyne(config.protocol, context.state, context.decomp,
                                     context.observable, float(t), mc.shots, mc.seed, stream),
             exact_variance[stream]),
            ("F_S", mc_f_s(context.state, context.decomp, context.observable, float(t),
                           mc.shots, mc.seed, stream),
             float(exact_f_s[stream])),
        )
        for quantity, estimate, exact in checks:
            z = estimate.z_score(exact)
            worst = max(worst, abs(z))
            rows.append((quantity, fmt(t), fmt(estimate.estimate), fmt(estimate.standard_error),
                         fmt(exact), fmt(z)))
    _write_rows(out_dir / MC_VALIDATE_FILE,
                ("quantity", "t", "mc", "standard_error", "exact", "z_score"), rows)
    if worst > MC_Z_LIMIT:
        logger.warning("Largest Monte Carlo deviation is %.2f standard errors", worst)
    else:
        logger.info("All Monte Carlo estimates within %.1f standard errors (max %.2f)",
                    MC_Z_LIMIT, worst)

    outputs = [MC_VALIDATE_FILE, MANIFEST_FILE]
    manifest = _manifest(context, command, started, outputs, mc_max_abs_z=worst)
    write_manifest(out_dir / MANIFEST_FILE, manifest)
    return manifest