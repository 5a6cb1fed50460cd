"""
Fourier analysis of correlator series.

C(omega) = integral dt exp(i omega t) F(t) is approximated on the sampled window.
One-sided series from stationary states are evenly extended to negative times;
two-sided series are transformed as sampled. Exact stick spectra from the
eigenbasis expansion serve as the reference the DFT peaks are compared against.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.signal

from config import settings
from models import PeakMatch, PeakMatchReport
from .correlators import CorrelatorKind, CorrelatorSeries, eigen_support
from .probe import EigenbasisProbe, ProbeObservable, ensure_eigenbasis
from .spinchain import ManyBodyState, SpectralDecomposition

logger = logging.getLogger(__name__)


class SpectrumKind(str, Enum):
    C_S = "C_S"
    C_M = "C_M"


class Window(str, Enum):
    RECT = "rect"
    HANN = "hann"


_SPECTRUM_OF = {CorrelatorKind.F_S: SpectrumKind.C_S, CorrelatorKind.F_M: SpectrumKind.C_M}


@dataclass(frozen=True, eq=False)
class Spectrum:
    omegas: np.ndarray
    amplitudes: np.ndarray
    values: np.ndarray
    kind: SpectrumKind
    window: Window
    resolution: float
    bin_width: float

    def normalized(self) -> np.ndarray:
        peak = float(np.max(self.amplitudes)) if self.amplitudes.size else 0.0
        return self.amplitudes / peak if peak > 0 else self.amplitudes


@dataclass(frozen=True)
class StickLine:
    """Delta line at omega with weight xi (imaginary part kept for non-even signals)."""

    omega: float
    weight: float
    kind: SpectrumKind
    weight_imag: float = 0.0


@dataclass(frozen=True)
class Peak:
    omega: float
    amplitude: float
    index: int


def time_grid(t_max: float, n_samples: int, two_sided: bool = False) -> np.ndarray:
    """Uniform grid on [0, t_max] including t = 0, mirrored to [-t_max, t_max] if two-sided."""
    if n_samples < 2:
        raise ValueError(f"need at least 2 samples, got {n_samples}")
    if t_max <= 0:
        raise ValueError(f"t_max must be positive, got {t_max}")
    grid = np.linspace(0.0, t_max, n_samples)
    if two_sided:
        grid = np.concatenate([-grid[:0:-1], grid])
    return grid


def sample_series(
    f: Callable[[float], float],
    t_max: float,
    n_samples: int,
    kind: CorrelatorKind = CorrelatorKind.F_M,
    two_sided: bool = False,
) -> CorrelatorSeries:
    times = time_grid(t_max, n_samples, two_sided)
    values = np.array([f(t) for t in times], dtype=float)
    return CorrelatorSeries(times=times, values=values, kind=kind)


def _window(window: Window, length: int) -> np.ndarray:
    if window is Window.RECT:
        return np.ones(length)
    return scipy.signal.windows.hann(length, sym=True)


def _prepare(series: CorrelatorSeries, window: Window) -> Tuple[np.ndarray, np.ndarray, float]:
    """Symmetric time grid, windowed samples and step."""
    times, values = series.times, series.values
    if times.size < 2:
        raise ValueError("a spectrum needs at least two samples")
    if not series.is_two_sided:
        if times[0] != 0.0:
            raise ValueError("one-sided series must start at t = 0")
        times = np.concatenate([-times[:0:-1], times])
        values = np.concatenate([values[:0:-1], values])
    steps = np.diff(times)
    dt = float(steps[0])
    if not np.allclose(steps, dt, rtol=1e-9, atol=0.0):
        raise ValueError("time grid is not uniform")
    if not np.isclose(times[0], -times[-1], rtol=1e-9, atol=1e-12):
        raise ValueError("two-sided grid is not symmetric about t = 0")
    return times, _window(window, times.size) * values, dt


def dft(series: CorrelatorSeries, window: Window = Window.HANN) -> Spectrum:
    """Windowed discrete approximation of integral dt exp(i omega t) F(t)."""
    window = Window(window)
    times, windowed, dt = _prepare(series, window)
    length = times.size
    center = (length - 1) // 2
    omegas = 2.0 * np.pi * np.fft.fftfreq(length, d=dt)
    values = dt * length * np.fft.ifft(windowed) * np.exp(-1j * omegas * center * dt)
    omegas = np.fft.fftshift(omegas)
    values = np.fft.fftshift(values)
    t_max = float(np.max(np.abs(times)))
    return Spectrum(
        omegas=omegas,
        amplitudes=np.abs(values),
        values=values,
        kind=_SPECTRUM_OF[series.kind],
        window=window,
        resolution=2.0 * np.pi / t_max,
        bin_width=2.0 * np.pi / (length * dt),
    )


def parseval_ratio(series: CorrelatorSeries, spectrum: Spectrum) -> float:
    """Spectral energy over the energy of the windowed samples; 1 for either window."""
    _, windowed, dt = _prepare(series, spectrum.window)
    sample_energy = dt * float(np.sum(np.abs(windowed) ** 2))
    spectral_energy = float(np.sum(np.abs(spectrum.values) ** 2)) * spectrum.bin_width / (2.0 * np.pi)
    return spectral_energy / sample_energy if sample_energy > 0 else float("nan")


def _aggregate(
    omegas: np.ndarray,
    weights: np.ndarray,
    kind: SpectrumKind,
) -> List[StickLine]:
    """Merge lines whose frequencies agree within GAP_MERGE_TOL."""
    if omegas.size == 0:
        return []
    order = np.argsort(omegas, kind="stable")
    omegas, weights = omegas[order], weights[order]
    breaks = np.flatnonzero(np.diff(omegas) > settings.GAP_MERGE_TOL) + 1
    sticks = []
    for chunk in np.split(np.arange(omegas.size), breaks):
        weight = complex(np.sum(weights[chunk]))
        if abs(weight) < settings.ZERO_PROBABILITY:
            continue
        sticks.append(StickLine(
            omega=float(np.mean(omegas[chunk])),
            weight=weight.real,
            kind=kind,
            weight_imag=weight.imag,
        ))
    return sticks


def stick_cm(
    decomp: SpectralDecomposition,
    observable: ProbeObservable,
    ground_index: int = 0,
) -> List[StickLine]:
    """xi_n = 2 |<E_n|J|E_0>|^2 at E_n - E_0 for an eigenstate reference."""
    vectors = decomp.eigenvectors
    column = vectors[:, ground_index]
    if hasattr(column, "toarray"):
        column = column.toarray().ravel()
    elements = decomp.to_eigenbasis(observable.diag * np.asarray(column))
    weights = 2.0 * np.abs(elements) ** 2
    keep = np.arange(decomp.dim) != ground_index
    gaps = decomp.eigenvalues - decomp.eigenvalues[ground_index]
    return _aggregate(gaps[keep], weights[keep].astype(complex), SpectrumKind.C_M)


def stick_cs(
    decomp: SpectralDecomposition,
    observable: ProbeObservable,
    state: ManyBodyState,
    j_eigen: Optional[EigenbasisProbe] = None,
) -> List[StickLine]:
    """Eigenbasis expansion of F_S: weight sum_i a_i <psi|P_i|E_n><E_n|J|E_m><E_m|P_i|psi>.

    F_S(t) = sum_nm xi_nm exp(i (E_n - E_m) t), so the line sits at omega = E_m - E_n.
    """
    j_eigen = ensure_eigenbasis(observable, decomp, j_eigen, state)
    energies = decomp.eigenvalues
    collapsed = []
    for group in observable.groups:
        vector = np.zeros_like(state.amplitudes)
        vector[group.indices] = state.amplitudes[group.indices]
        if np.vdot(vector, vector).real >= settings.ZERO_PROBABILITY:
            collapsed.append((group.value, decomp.to_eigenbasis(vector)))
    if not collapsed:
        return []

    support = np.unique(np.concatenate([eigen_support(alpha) for _, alpha in collapsed]))
    levels = energies[support]
    restricted = [(value, alpha[support]) for value, alpha in collapsed]
    all_frequencies, all_weights = [], []
    for rows, cols, block in j_eigen.restrict(support, support).pieces:
        weights = np.zeros(block.shape, dtype=complex)
        for value, alpha in restricted:
            weights += value * alpha[rows].conj()[:, None] * block * alpha[cols][None, :]
        frequencies = levels[cols][None, :] - levels[rows][:, None]
        significant = np.abs(weights) >= settings.ZERO_PROBABILITY
        all_frequencies.append(frequencies[significant])
        all_weights.append(weights[significant])
    if not all_weights:
        return []
    return _aggregate(np.concatenate(all_frequencies), np.concatenate(all_weights), SpectrumKind.C_S)


def peaks(
    spectrum: Spectrum,
    rel_threshold: Optional[float] = None,
    omega_min: Optional[float] = None,
    positive_only: bool = True,
) -> List[Peak]:
    """Local maxima above rel_threshold * max amplitude, outside |omega| < omega_min."""
    if spectrum.amplitudes.size == 0:
        raise ValueError("empty spectrum")
    if rel_threshold is None:
        rel_threshold = settings.REL_THRESHOLD
    if not 0.0 < rel_threshold < 1.0:
        raise ValueError(f"rel_threshold must lie in (0, 1), got {rel_threshold}")
    if omega_min is None:
        omega_min = settings.OMEGA_MIN_FACTOR * spectrum.resolution

    height = rel_threshold * float(np.max(spectrum.amplitudes))
    indices, _ = scipy.signal.find_peaks(spectrum.amplitudes, height=height)
    found = []
    for index in indices:
        omega = float(spectrum.omegas[index])
        if positive_only and omega < 0:
            continue
        if abs(omega) < omega_min:
            continue
        found.append(Peak(omega=omega, amplitude=float(spectrum.amplitudes[index]), index=int(index)))
    return found


def match_peaks(
    detected: Sequence[Peak],
    gaps: Sequence[float],
    tol: float,
    resolution: Optional[float] = None,
) -> PeakMatchReport:
    """Map each peak to its nearest gap and flag the ones farther than tol."""
    if resolution is not None and tol < resolution * (1.0 - 1e-12):
        raise ValueError(f"tolerance {tol} is below the resolution {resolution}")
    gaps = np.sort(np.asarray(gaps, dtype=float))
    matches = []
    for peak in detected:
        if gaps.size:
            nearest = float(gaps[np.argmin(np.abs(gaps - peak.omega))])
            distance = abs(peak.omega - nearest)
        else:
            nearest, distance = None, None
        matches.append(PeakMatch(
            omega=peak.omega,
            amplitude=peak.amplitude,
            nearest_gap=nearest,
            distance=distance,
            matched=distance is not None and distance <= tol,
        ))
    unmatched = [match.omega for match in matches if not match.matched]
    fraction = (len(matches) - len(unmatched)) / len(matches) if matches else 1.0
    report = PeakMatchReport(
        tolerance=tol,
        matches=matches,
        matched_fraction=fraction,
        unmatched=unmatched,
    )
    logger.info("Peak match: %s", report.summary())
    return report
