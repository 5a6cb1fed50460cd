"""
Two-time correlators of the probe observable.

F_S(t) is the mean of the product of two sequential projective outcomes of J;
F_M(t) = <{J(t), J(0)}> - 2 <J(t)><J(0)> is the symmetrized correlator that the
memory-assisted protocol reads out. Series are evaluated in the eigenbasis of H,
batched over time chunks and restricted to the amplitudes the state populates.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

from config import settings
from .probe import EigenbasisProbe, ProbeObservable, ensure_eigenbasis
from .spinchain import ManyBodyState, SpectralDecomposition, evolve_vector, sz_diagonal

logger = logging.getLogger(__name__)

IMAG_TOL = 1e-10


class CorrelatorKind(str, Enum):
    F_S = "F_S"
    F_M = "F_M"


@dataclass(frozen=True, eq=False)
class CorrelatorSeries:
    """Real correlator samples on a time grid (units 1/g)."""

    times: np.ndarray
    values: np.ndarray
    kind: CorrelatorKind
    max_imag: float = 0.0

    def __len__(self) -> int:
        return self.times.size

    @property
    def is_two_sided(self) -> bool:
        return bool(self.times.size and self.times.min() < 0)

    def sample_variance(self) -> float:
        return float(np.var(self.values, ddof=1)) if self.values.size > 1 else 0.0


def eigen_support(coefficients: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.abs(coefficients) > settings.SUPPORT_CUTOFF)


def _time_chunks(times: np.ndarray) -> Iterator[slice]:
    step = max(1, settings.TIME_CHUNK)
    for start in range(0, times.size, step):
        yield slice(start, min(start + step, times.size))


def phase_columns(coefficients: np.ndarray, energies: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Columns c_n exp(-i E_n t) for every t."""
    return coefficients[:, None] * np.exp(-1j * np.outer(energies, times))


def _check_residue(kind: CorrelatorKind, residue: float) -> None:
    if residue > IMAG_TOL:
        logger.warning("%s imaginary residue %.3e exceeds %.0e", kind.value, residue, IMAG_TOL)


def f_s_series(
    state: ManyBodyState,
    decomp: SpectralDecomposition,
    observable: ProbeObservable,
    times: Sequence[float],
    j_eigen: Optional[EigenbasisProbe] = None,
) -> CorrelatorSeries:
    """sum_i a_i <psi|P_i J(t) P_i|psi> on a grid."""
    times = np.asarray(times, dtype=float)
    j_eigen = ensure_eigenbasis(observable, decomp, j_eigen, state)
    energies = decomp.eigenvalues
    values = np.zeros(times.size, dtype=complex)

    for group in observable.groups:
        collapsed = np.zeros_like(state.amplitudes)
        collapsed[group.indices] = state.amplitudes[group.indices]
        if np.vdot(collapsed, collapsed).real < settings.ZERO_PROBABILITY:
            continue
        coefficients = decomp.to_eigenbasis(collapsed)
        support = eigen_support(coefficients)
        block = j_eigen.restrict(support, support)
        for chunk in _time_chunks(times):
            phased = phase_columns(coefficients[support], energies[support], times[chunk])
            expectation = np.einsum("nt,nt->t", phased.conj(), block @ phased)
            values[chunk] += group.value * expectation

    residue = float(np.max(np.abs(values.imag))) if values.size else 0.0
    _check_residue(CorrelatorKind.F_S, residue)
    return CorrelatorSeries(times=times, values=values.real, kind=CorrelatorKind.F_S,
                            max_imag=residue)


def f_m_series(
    state: ManyBodyState,
    decomp: SpectralDecomposition,
    observable: ProbeObservable,
    times: Sequence[float],
    j_eigen: Optional[EigenbasisProbe] = None,
) -> CorrelatorSeries:
    """2 Re <psi(t)|J|(J psi)(t)> - 2 <J>_psi(t) <J>_psi on a grid."""
    times = np.asarray(times, dtype=float)
    j_eigen = ensure_eigenbasis(observable, decomp, j_eigen, state)
    energies = decomp.eigenvalues

    psi = decomp.to_eigenbasis(state.amplitudes)
    phi = j_eigen @ psi
    mean_initial = float(np.vdot(psi, phi).real)
    psi_support = eigen_support(psi)
    phi_support = eigen_support(phi)
    cross_block = j_eigen.restrict(psi_support, phi_support)
    mean_block = j_eigen.restrict(psi_support, psi_support)

    values = np.empty(times.size)
    residue = 0.0
    for chunk in _time_chunks(times):
        psi_t = phase_columns(psi[psi_support], energies[psi_support], times[chunk])
        phi_t = phase_columns(phi[phi_support], energies[phi_support], times[chunk])
        cross = np.einsum("nt,nt->t", psi_t.conj(), cross_block @ phi_t)
        mean_t = np.einsum("nt,nt->t", psi_t.conj(), mean_block @ psi_t)
        residue = max(residue, float(np.max(np.abs(mean_t.imag))))
        values[chunk] = 2.0 * cross.real - 2.0 * mean_t.real * mean_initial

    _check_residue(CorrelatorKind.F_M, residue)
    return CorrelatorSeries(times=times, values=values, kind=CorrelatorKind.F_M,
                            max_imag=residue)


def probe_moments_series(
    state: ManyBodyState,
    decomp: SpectralDecomposition,
    observable: ProbeObservable,
    times: Sequence[float],
    j_eigen: Optional[EigenbasisProbe] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """(<J>_psi(t), [Delta J(t)]^2) on a grid."""
    times = np.asarray(times, dtype=float)
    j_eigen = ensure_eigenbasis(observable, decomp, j_eigen, state)
    energies = decomp.eigenvalues
    psi = decomp.to_eigenbasis(state.amplitudes)
    support = eigen_support(psi)
    rows = j_eigen.coupled(support)
    columns = j_eigen.restrict(rows, support)
    inside = np.searchsorted(rows, support)

    means = np.empty(times.size)
    variances = np.empty(times.size)
    for chunk in _time_chunks(times):
        psi_t = phase_columns(psi[support], energies[support], times[chunk])
        j_psi = columns @ psi_t
        mean = np.einsum("nt,nt->t", psi_t.conj(), j_psi[inside]).real
        means[chunk] = mean
        variances[chunk] = np.einsum("nt,nt->t", j_psi.conj(), j_psi).real - mean ** 2
    return means, variances


def f_s(state: ManyBodyState, decomp: SpectralDecomposition,
        observable: ProbeObservable, t: float) -> float:
    return float(f_s_series(state, decomp, observable, [t]).values[0])


def f_m(state: ManyBodyState, decomp: SpectralDecomposition,
        observable: ProbeObservable, t: float) -> float:
    return float(f_m_series(state, decomp, observable, [t]).values[0])


def g_mn(
    state: ManyBodyState,
    decomp: SpectralDecomposition,
    m: int,
    n: int,
    t: float,
    t_prime: float,
) -> Tuple[complex, complex]:
    """(G_mn(t, t'), G_nm(t', t)) with G_mn(t, t') = <j_m(t) j_n(t')> - <j_m(t)><j_n(t')>."""
    jm = sz_diagonal(state.n_sites, m)
    jn = sz_diagonal(state.n_sites, n)
    psi = state.amplitudes
    psi_t = evolve_vector(psi, decomp, t)
    psi_tp = evolve_vector(psi, decomp, t_prime)

    mean_m = np.vdot(psi_t, jm * psi_t)
    mean_n = np.vdot(psi_tp, jn * psi_tp)
    forward = np.vdot(psi_t, jm * evolve_vector(jn * psi_tp, decomp, t - t_prime))
    backward = np.vdot(psi_tp, jn * evolve_vector(jm * psi_t, decomp, t_prime - t))
    return complex(forward - mean_m * mean_n), complex(backward - mean_n * mean_m)


def f_m_from_gmn(
    state: ManyBodyState,
    decomp: SpectralDecomposition,
    coefficients: np.ndarray,
    t: float,
) -> float:
    """Site-resolved F_M(t) = sum_{n,m} c_n c_m [G_mn(t,0) + G_nm(0,t)] / N."""
    n_sites = state.n_sites
    total = 0.0 + 0.0j
    for m in range(n_sites):
        for n in range(n_sites):
            if coefficients[m] == 0.0 or coefficients[n] == 0.0:
                continue
            forward, backward = g_mn(state, decomp, m, n, t, 0.0)
            total += coefficients[m] * coefficients[n] * (forward + backward)
    _check_residue(CorrelatorKind.F_M, abs(total.imag))
    return float(total.real / n_sites)
