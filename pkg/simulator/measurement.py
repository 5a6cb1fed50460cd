"""
Shot-by-shot Monte Carlo of the two measurement schemes.

Sampling is split into fixed-size blocks, each drawing from its own generator
seeded with (seed, stream, block). Results are therefore identical for a given
seed no matter how many blocks are processed or in which order.
"""
import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse

from config import settings
from engine.gaussian import HybridLinearForm, run_protocol, single_probe_form
from engine.probe import ProbeObservable
from engine.spinchain import (
    ManyBodyState,
    SpectralDecomposition,
    evolve_vector,
    magnetization_sectors,
)
from models import ProtocolParams

logger = logging.getLogger(__name__)

STREAM_PROJECTIVE = 0
STREAM_HOMODYNE = 1
STREAM_SINGLE_PROBE = 2


@dataclass(frozen=True)
class ShotEstimate:
    estimate: float
    standard_error: float
    shots: int

    def z_score(self, reference: float) -> float:
        """Deviation from an exact value in units of the standard error."""
        if self.standard_error == 0.0:
            return 0.0 if math.isclose(self.estimate, reference, rel_tol=1e-9, abs_tol=1e-12) else float("inf")
        return (self.estimate - reference) / self.standard_error


def block_generators(
    seed: int,
    shots: int,
    stream: Tuple[int, ...],
) -> Iterator[Tuple[int, np.random.Generator]]:
    """(block size, generator) pairs covering ``shots`` draws."""
    block = max(1, settings.MC_BLOCK_SIZE)
    for index, start in enumerate(range(0, shots, block)):
        sequence = np.random.SeedSequence(seed, spawn_key=(*stream, index))
        yield min(block, shots - start), np.random.default_rng(sequence)


def _normalized(probabilities: np.ndarray) -> np.ndarray:
    probabilities = np.clip(probabilities, 0.0, None)
    return probabilities / probabilities.sum()


def mc_f_s(
    state: ManyBodyState,
    decomp: SpectralDecomposition,
    observable: ProbeObservable,
    t: float,
    shots: int,
    seed: int = 0,
    stream: int = 0,
) -> ShotEstimate:
    """Average of a_i a_j over simulated pairs of projective J measurements at 0 and t."""
    if shots < 1:
        raise ValueError(f"shots must be at least 1, got {shots}")

    values = observable.values
    first_outcomes: List[int] = []
    first_probabilities: List[float] = []
    conditional: List[np.ndarray] = []
    for index, group in enumerate(observable.groups):
        collapsed = np.zeros_like(state.amplitudes)
        collapsed[group.indices] = state.amplitudes[group.indices]
        weight = float(np.vdot(collapsed, collapsed).real)
        if weight < settings.ZERO_PROBABILITY:
            continue
        evolved = evolve_vector(collapsed / np.sqrt(weight), decomp, t)
        second = np.array([
            float(np.sum(np.abs(evolved[other.indices]) ** 2)) for other in observable.groups
        ])
        first_outcomes.append(index)
        first_probabilities.append(weight)
        conditional.append(_normalized(second))

    first_outcomes_arr = np.asarray(first_outcomes)
    first_p = _normalized(np.asarray(first_probabilities))
    products = np.empty(shots)
    cursor = 0
    for size, rng in block_generators(seed, shots, (STREAM_PROJECTIVE, stream)):
        picks = rng.choice(first_outcomes_arr.size, size=size, p=first_p)
        block = np.empty(size)
        for pick in np.unique(picks):
            mask = picks == pick
            seconds = rng.choice(values.size, size=int(mask.sum()), p=conditional[pick])
            block[mask] = values[first_outcomes_arr[pick]] * values[seconds]
        products[cursor:cursor + size] = block
        cursor += size

    error = float(np.std(products, ddof=1) / np.sqrt(shots)) if shots > 1 else float("inf")
    return ShotEstimate(estimate=float(np.mean(products)), standard_error=error, shots=shots)


def _measured_operator_spectrum(
    form: HybridLinearForm,
    state: ManyBodyState,
    decomp: SpectralDecomposition,
    observable: ProbeObservable,
) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of K = sum_k w_k J(t_k) and their Born probabilities in psi.

    K commutes with total S^z, so only the magnetization sectors that psi
    populates are diagonalized.
    """
    slot_weights = form.slot_weights()
    outcomes = []
    probabilities = []
    for indices in magnetization_sectors(state.n_sites).values():
        amplitudes = state.amplitudes[indices]
        if np.vdot(amplitudes, amplitudes).real < settings.ZERO_PROBABILITY:
            continue
        rows = decomp.eigenvectors[indices, :]
        if scipy.sparse.issparse(rows):
            weights = np.asarray(abs(rows).power(2).sum(axis=0)).ravel()
            occupied = np.flatnonzero(weights > settings.SUPPORT_CUTOFF)
            rows = rows[:, occupied].toarray()
        else:
            rows = np.asarray(rows)
            occupied = np.flatnonzero(np.sum(np.abs(rows) ** 2, axis=0) > settings.SUPPORT_CUTOFF)
            rows = rows[:, occupied]
        energies = decomp.eigenvalues[occupied]
        j_sector = observable.diag[indices]
        block = np.zeros((indices.size, indices.size), dtype=complex)
        for _, t, weight in slot_weights:
            propagator = (rows * np.exp(-1j * energies * t)[None, :]) @ rows.conj().T
            block += weight * (propagator.conj().T @ (j_sector[:, None] * propagator))
        eigenvalues, eigenvectors = scipy.linalg.eigh(0.5 * (block + block.conj().T))
        outcomes.append(eigenvalues)
        probabilities.append(np.abs(eigenvectors.conj().T @ amplitudes) ** 2)
    return np.concatenate(outcomes), _normalized(np.concatenate(probabilities))


def sample_quadrature(
    form: HybridLinearForm,
    state: ManyBodyState,
    decomp: SpectralDecomposition,
    observable: ProbeObservable,
    shots: int,
    seed: int,
    stream: Tuple[int, ...],
) -> np.ndarray:
    """Homodyne records: a Born draw of K plus Gaussian vacuum noise."""
    outcomes, probabilities = _measured_operator_spectrum(form, state, decomp, observable)
    noise_sigma = np.sqrt(form.vacuum_variance())
    records = np.empty(shots)
    cursor = 0
    for size, rng in block_generators(seed, shots, stream):
        picks = rng.choice(outcomes.size, size=size, p=probabilities)
        records[cursor:cursor + size] = outcomes[picks] + rng.normal(0.0, noise_sigma, size=size)
        cursor += size
    return records


def variance_estimate(records: np.ndarray) -> ShotEstimate:
    """Unbiased sample variance with SE from the fourth central moment."""
    n = records.size
    if n < 2:
        raise ValueError(f"a variance needs at least 2 shots, got {n}")
    centered = records - records.mean()
    s2 = float(np.sum(centered ** 2) / (n - 1))
    m4 = float(np.mean(centered ** 4))
    spread = max(m4 - s2 ** 2 * (n - 3) / (n - 1), 0.0)
    return ShotEstimate(estimate=s2, standard_error=float(np.sqrt(spread / n)), shots=n)


def mc_homodyne(
    params: ProtocolParams,
    state: ManyBodyState,
    decomp: SpectralDecomposition,
    observable: ProbeObservable,
    t: float,
    shots: int,
    seed: int = 0,
    stream: int = 0,
) -> ShotEstimate:
    """Sample variance of the simulated X_L2 records of the memory-assisted protocol."""
    form = run_protocol(params, t)
    records = sample_quadrature(form, state, decomp, observable, shots, seed,
                                (STREAM_HOMODYNE, stream))
    estimate = variance_estimate(records)
    logger.debug("Homodyne MC at t=%.4g: %.6g +- %.2g", t, estimate.estimate,
                 estimate.standard_error)
    return estimate


def mc_single_probe(
    kappa: float,
    state: ManyBodyState,
    decomp: SpectralDecomposition,
    observable: ProbeObservable,
    t: float,
    shots: int,
    seed: int = 0,
    stream: int = 0,
) -> ShotEstimate:
    """[Delta J(t)]^2 recovered from a single simulated Faraday probe."""
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    form = single_probe_form(kappa, t)
    records = sample_quadrature(form, state, decomp, observable, shots, seed,
                                (STREAM_SINGLE_PROBE, stream))
    raw = variance_estimate(records)
    return ShotEstimate(
        estimate=(raw.estimate - form.vacuum_variance()) / kappa ** 2,
        standard_error=raw.standard_error / kappa ** 2,
        shots=shots,
    )
