"""
Quadrature bookkeeping of the memory-assisted probing protocol.

Every light and memory quadrature is tracked in the Heisenberg picture as a real
linear form over input vacuum quadratures and operator slots J(t_k). Gates update
the forms; the measured form of the second light pulse is then evaluated against
the many-body state.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from models import CouplingSpec, ProtocolParams
from .correlators import phase_columns, eigen_support
from .errors import StructuralError
from .probe import EigenbasisProbe, ProbeObservable, ensure_eigenbasis
from .spinchain import ManyBodyState, SpectralDecomposition

logger = logging.getLogger(__name__)

VACUUM_VARIANCE = 0.5
SLOT_INITIAL = "J(0)"
SLOT_DELAYED = "J(t)"


class Mode(str, Enum):
    L1 = "L1"
    L2 = "L2"
    M = "M"
    V_LOSS = "V_loss"


class Quadrature(str, Enum):
    X = "X"
    P = "P"


@dataclass(frozen=True)
class VacuumTerm:
    mode: str
    quadrature: Quadrature
    coefficient: float


@dataclass(frozen=True)
class OperatorTerm:
    slot: str
    coefficient: float


@dataclass(frozen=True, eq=False)
class HybridLinearForm:
    """sum (u X_in + v P_in) over vacuum modes plus sum w_k J(t_k)."""

    vacuum_terms: Tuple[VacuumTerm, ...]
    operator_terms: Tuple[OperatorTerm, ...]
    slots: Dict[str, float] = field(default_factory=dict)

    def vacuum_coefficient(self, mode: str, quadrature: Quadrature) -> float:
        mode = getattr(mode, "value", mode)
        for term in self.vacuum_terms:
            if term.mode == mode and term.quadrature is quadrature:
                return term.coefficient
        return 0.0

    def operator_coefficient(self, slot: str) -> float:
        for term in self.operator_terms:
            if term.slot == slot:
                return term.coefficient
        return 0.0

    def vacuum_variance(self) -> float:
        """Contribution of the vacuum inputs, each of variance 1/2."""
        return VACUUM_VARIANCE * sum(term.coefficient ** 2 for term in self.vacuum_terms)

    def slot_weights(self) -> List[Tuple[str, float, float]]:
        """(slot, system time, coefficient) for every operator term."""
        weights = []
        for term in self.operator_terms:
            if term.slot not in self.slots:
                raise StructuralError(f"operator slot {term.slot!r} is not registered")
            weights.append((term.slot, self.slots[term.slot], term.coefficient))
        return weights


_Form = Tuple[Dict[Tuple[str, Quadrature], float], Dict[str, float]]


def _combine(first: _Form, a: float, second: _Form, b: float) -> _Form:
    vacuum: Dict[Tuple[str, Quadrature], float] = {}
    operators: Dict[str, float] = {}
    for (terms, weight) in ((first[0], a), (second[0], b)):
        for key, value in terms.items():
            vacuum[key] = vacuum.get(key, 0.0) + weight * value
    for (terms, weight) in ((first[1], a), (second[1], b)):
        for key, value in terms.items():
            operators[key] = operators.get(key, 0.0) + weight * value
    return (
        {key: value for key, value in vacuum.items() if value != 0.0},
        {key: value for key, value in operators.items() if value != 0.0},
    )


class QuadratureCircuit:
    """Applies Faraday, rotation, memory and loss gates to tracked quadratures."""

    def __init__(self, modes: Sequence[str] = (Mode.L1, Mode.L2, Mode.M)):
        self._forms: Dict[Tuple[str, Quadrature], _Form] = {}
        self._slots: Dict[str, float] = {}
        self._gates: List[str] = []
        for mode in modes:
            self.add_vacuum_mode(mode)

    @staticmethod
    def _name(mode) -> str:
        return getattr(mode, "value", mode)

    def add_vacuum_mode(self, mode) -> str:
        """Register a fresh mode whose quadratures start as their own vacuum inputs."""
        name = self._name(mode)
        base, suffix = name, 1
        while (name, Quadrature.X) in self._forms:
            suffix += 1
            name = f"{base}{suffix}"
        for quadrature in Quadrature:
            self._forms[(name, quadrature)] = ({(name, quadrature): 1.0}, {})
        return name

    def register_slot(self, slot: str, t: float) -> str:
        self._slots[slot] = float(t)
        return slot

    @property
    def slots(self) -> Dict[str, float]:
        return dict(self._slots)

    @property
    def gates(self) -> List[str]:
        return list(self._gates)

    def _get(self, mode, quadrature: Quadrature) -> _Form:
        key = (self._name(mode), quadrature)
        if key not in self._forms:
            raise StructuralError(f"mode {key[0]!r} is not part of the circuit")
        return self._forms[key]

    def _set(self, mode, quadrature: Quadrature, form: _Form) -> None:
        self._forms[(self._name(mode), quadrature)] = form

    def faraday(self, mode, kappa: float, slot: str) -> "QuadratureCircuit":
        """X_L -> X_L - kappa J(slot); P_L unchanged."""
        if slot not in self._slots:
            raise StructuralError(f"operator slot {slot!r} is not registered")
        x = self._get(mode, Quadrature.X)
        kick: _Form = ({}, {slot: 1.0})
        self._set(mode, Quadrature.X, _combine(x, 1.0, kick, -kappa))
        self._gates.append(f"faraday({self._name(mode)}, {kappa:g}, {slot})")
        return self

    def rotate(self, mode, phi: float) -> "QuadratureCircuit":
        """X -> cos(phi) X + sin(phi) P, P -> cos(phi) P - sin(phi) X."""
        x = self._get(mode, Quadrature.X)
        p = self._get(mode, Quadrature.P)
        c, s = math.cos(phi), math.sin(phi)
        self._set(mode, Quadrature.X, _combine(x, c, p, s))
        self._set(mode, Quadrature.P, _combine(p, c, x, -s))
        self._gates.append(f"rotate({self._name(mode)}, {phi:g})")
        return self

    def write(self, kappa_w: float, light=Mode.L1, memory=Mode.M) -> "QuadratureCircuit":
        """X_M -> X_M + kappa_W P_L."""
        x_memory = self._get(memory, Quadrature.X)
        p_light = self._get(light, Quadrature.P)
        self._set(memory, Quadrature.X, _combine(x_memory, 1.0, p_light, kappa_w))
        self._gates.append(f"write({kappa_w:g})")
        return self

    def read(self, kappa_r: float, light=Mode.L2, memory=Mode.M) -> "QuadratureCircuit":
        """X_L -> X_L + kappa_R P_M."""
        x_light = self._get(light, Quadrature.X)
        p_memory = self._get(memory, Quadrature.P)
        self._set(light, Quadrature.X, _combine(x_light, 1.0, p_memory, kappa_r))
        self._gates.append(f"read({kappa_r:g})")
        return self

    def apply_memory_loss(self, eta_mem: float, memory=Mode.M) -> "QuadratureCircuit":
        """Beam-splitter admixture Q_M -> sqrt(eta) Q_M + sqrt(1 - eta) Q_V of a fresh vacuum."""
        if not 0.0 < eta_mem <= 1.0:
            raise ValueError(f"memory transmission must lie in (0, 1], got {eta_mem}")
        if eta_mem == 1.0:
            return self
        loss_mode = self.add_vacuum_mode(Mode.V_LOSS)
        kept, admixed = math.sqrt(eta_mem), math.sqrt(1.0 - eta_mem)
        for quadrature in Quadrature:
            stored = self._get(memory, quadrature)
            vacuum = self._get(loss_mode, quadrature)
            self._set(memory, quadrature, _combine(stored, kept, vacuum, admixed))
        self._gates.append(f"loss({eta_mem:g})")
        return self

    def form(self, mode, quadrature: Quadrature = Quadrature.X) -> HybridLinearForm:
        vacuum, operators = self._get(mode, quadrature)
        return HybridLinearForm(
            vacuum_terms=tuple(
                VacuumTerm(mode=key[0], quadrature=key[1], coefficient=value)
                for key, value in sorted(vacuum.items(), key=lambda item: (item[0][0], item[0][1].value))
            ),
            operator_terms=tuple(
                OperatorTerm(slot=key, coefficient=value) for key, value in sorted(operators.items())
            ),
            slots=dict(self._slots),
        )


def coupling_from_optics(d: float, eta_A: float) -> CouplingSpec:
    return CouplingSpec(d=d, eta_A=eta_A)


def build_protocol(params: ProtocolParams, t: float) -> QuadratureCircuit:
    """Gate sequence of the memory-assisted protocol for delay t."""
    circuit = QuadratureCircuit()
    circuit.register_slot(SLOT_INITIAL, 0.0)
    circuit.register_slot(SLOT_DELAYED, t)
    circuit.faraday(Mode.L1, params.kappa1, SLOT_INITIAL)
    circuit.rotate(Mode.L1, math.pi / 2)
    circuit.write(params.kappa_w)
    circuit.rotate(Mode.M, math.pi / 2)
    circuit.apply_memory_loss(params.eta_mem)
    circuit.faraday(Mode.L2, params.kappa2, SLOT_DELAYED)
    circuit.read(params.kappa_r)
    return circuit


def run_protocol(params: ProtocolParams, t: float) -> HybridLinearForm:
    """Measured form of X_L2 after the read interaction."""
    return build_protocol(params, t).form(Mode.L2, Quadrature.X)


@dataclass(frozen=True)
class VarianceBreakdown:
    """Measured variance split into vacuum floor, per-slot variances and the cross term."""

    total: float
    noise_floor: float
    slot_terms: Dict[str, float]
    cross_term: float

    @property
    def var_jt_term(self) -> float:
        return self.slot_terms.get(SLOT_DELAYED, 0.0)

    @property
    def var_j0_term(self) -> float:
        return self.slot_terms.get(SLOT_INITIAL, 0.0)

    @property
    def eta(self) -> float:
        """Noise of the signal: everything except the cross term."""
        return self.noise_floor + sum(self.slot_terms.values())


def _heisenberg_images(
    state: ManyBodyState,
    decomp: SpectralDecomposition,
    observable: ProbeObservable,
    times: np.ndarray,
    j_eigen: Optional[EigenbasisProbe] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenbasis coefficients of psi and of J(t_k)|psi> for each t_k (columns).

    Both are restricted to the levels in the sectors psi populates.
    """
    j_eigen = ensure_eigenbasis(observable, decomp, j_eigen, state)
    energies = decomp.eigenvalues
    psi = decomp.to_eigenbasis(state.amplitudes)
    support = eigen_support(psi)
    rows = j_eigen.coupled(support)
    phased = phase_columns(psi[support], energies[support], times)
    images = np.exp(1j * np.outer(energies[rows], times)) * (j_eigen.restrict(rows, support) @ phased)
    return psi[rows], images


def variance_series(
    forms: Sequence[HybridLinearForm],
    state: ManyBodyState,
    decomp: SpectralDecomposition,
    observable: ProbeObservable,
    j_eigen: Optional[EigenbasisProbe] = None,
) -> List[VarianceBreakdown]:
    """Evaluate many measured forms against one state, sharing the propagation."""
    weights = [form.slot_weights() for form in forms]
    all_times = np.array([t for slot_weights in weights for _, t, _ in slot_weights], dtype=float)
    unique_times, inverse = np.unique(all_times, return_inverse=True)
    if unique_times.size:
        psi, images = _heisenberg_images(state, decomp, observable, unique_times, j_eigen)
        means = (psi.conj() @ images).real

    results = []
    cursor = 0
    for form, slot_weights in zip(forms, weights):
        columns = inverse[cursor:cursor + len(slot_weights)]
        cursor += len(slot_weights)
        slot_terms: Dict[str, float] = {}
        operator_variance = 0.0
        for a, (slot, _, w_a) in enumerate(slot_weights):
            for b, (_, _, w_b) in enumerate(slot_weights):
                ka, kb = columns[a], columns[b]
                covariance = float(np.vdot(images[:, ka], images[:, kb]).real) - means[ka] * means[kb]
                operator_variance += w_a * w_b * covariance
                if a == b:
                    slot_terms[slot] = slot_terms.get(slot, 0.0) + w_a * w_a * covariance
        noise_floor = form.vacuum_variance()
        results.append(VarianceBreakdown(
            total=noise_floor + operator_variance,
            noise_floor=noise_floor,
            slot_terms=slot_terms,
            cross_term=operator_variance - sum(slot_terms.values()),
        ))
    return results


def variance(
    form: HybridLinearForm,
    state: ManyBodyState,
    decomp: SpectralDecomposition,
    observable: ProbeObservable,
) -> VarianceBreakdown:
    return variance_series([form], state, decomp, observable)[0]


def single_probe_form(kappa: float, t: float) -> HybridLinearForm:
    """One Faraday pass on fresh light, used to calibrate [Delta J(t)]^2 on its own."""
    circuit = QuadratureCircuit(modes=(Mode.L2,))
    circuit.register_slot(SLOT_DELAYED, t)
    circuit.faraday(Mode.L2, kappa, SLOT_DELAYED)
    return circuit.form(Mode.L2)


def single_probe_variance(
    kappa: float,
    state: ManyBodyState,
    decomp: SpectralDecomposition,
    observable: ProbeObservable,
    t: float,
) -> VarianceBreakdown:
    """[Delta X_L]^2 = 1/2 + kappa^2 [Delta J(t)]^2."""
    return variance(single_probe_form(kappa, t), state, decomp, observable)


def noise_series(
    params: ProtocolParams,
    var_jt: np.ndarray,
    var_j0: np.ndarray,
) -> np.ndarray:
    """eta(t) = N + kappa_2^2 Var J(t) + eta_mem (kappa_T/kappa_2)^2 Var J(0)."""
    var_jt = np.asarray(var_jt, dtype=float)
    var_j0 = np.broadcast_to(np.asarray(var_j0, dtype=float), var_jt.shape)
    memory_weight = params.eta_mem * (params.kappa_t / params.kappa2) ** 2
    return params.noise_floor + params.kappa2 ** 2 * var_jt + memory_weight * var_j0


def subtract_noise(
    total: np.ndarray,
    var_jt: np.ndarray,
    var_j0: np.ndarray,
    params: ProtocolParams,
) -> np.ndarray:
    """Recover F_M(t) from the measured variance and the separately measured noise terms."""
    total = np.asarray(total, dtype=float)
    var_jt = np.asarray(var_jt, dtype=float)
    var_j0 = np.asarray(var_j0, dtype=float)
    if var_jt.shape != total.shape or (var_j0.ndim and var_j0.shape != total.shape):
        raise ValueError("variance series do not share the time grid")
    if params.kappa_t == 0.0:
        raise ValueError("kappa_T = 0: the memory signal is undefined")
    signal = (total - noise_series(params, var_jt, var_j0)) / params.kappa_t
    if params.compensate_loss:
        signal = signal / params.signal_scale
    return signal


def signal_to_noise(params: ProtocolParams, f_m_values: np.ndarray) -> Dict[str, Optional[float]]:
    """Vacuum floor against the largest memory signal on the grid."""
    peak = float(np.max(np.abs(f_m_values))) if np.size(f_m_values) else 0.0
    signal = params.kappa_t * params.signal_scale * peak
    return {
        "noise_floor": params.noise_floor,
        "max_signal": signal,
        "noise_to_signal": params.noise_floor / signal if signal > 0 else None,
        "signal_scale": params.signal_scale,
    }
