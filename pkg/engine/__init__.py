from .errors import CapacityError, ConfigError, QmapError, StructuralError
from .spinchain import (
    ManyBodyState,
    SpectralDecomposition,
    build_hamiltonian,
    diagonalize,
    evolve,
    ground_state,
    heisenberg,
    singlet_product_state,
)
from .probe import (
    EigenbasisProbe,
    ProbeObservable,
    build_J,
    build_probe,
    eigengroups,
    modulation_coefficients,
    probe_in_eigenbasis,
)
from .correlators import CorrelatorSeries, f_m, f_m_series, f_m_from_gmn, f_s, f_s_series, g_mn
from .gaussian import (
    HybridLinearForm,
    QuadratureCircuit,
    coupling_from_optics,
    run_protocol,
    single_probe_variance,
    subtract_noise,
    variance,
    variance_series,
)
from .spectra import Spectrum, StickLine, dft, match_peaks, peaks, stick_cm, stick_cs

__all__ = [
    "QmapError", "CapacityError", "ConfigError", "StructuralError",
    "ManyBodyState", "SpectralDecomposition", "build_hamiltonian", "diagonalize", "evolve",
    "ground_state", "heisenberg", "singlet_product_state",
    "EigenbasisProbe", "ProbeObservable", "build_J", "build_probe", "eigengroups",
    "modulation_coefficients", "probe_in_eigenbasis",
    "CorrelatorSeries", "f_m", "f_m_series", "f_m_from_gmn", "f_s", "f_s_series", "g_mn",
    "HybridLinearForm", "QuadratureCircuit", "coupling_from_optics", "run_protocol",
    "single_probe_variance", "subtract_noise", "variance", "variance_series",
    "Spectrum", "StickLine", "dft", "match_peaks", "peaks", "stick_cm", "stick_cs",
]
