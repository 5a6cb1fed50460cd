from .chain import Boundary, SpinChainSpec
from .probe import ProbeGeometry
from .protocol import CouplingSpec, ProtocolParams
from .report import PeakMatch, PeakMatchReport, RunManifest
from .experiment import (
    ExperimentConfig,
    GridSpec,
    MonteCarloSpec,
    Scenario,
    ScenarioKind,
    load_experiment,
)

__all__ = [
    "Boundary", "SpinChainSpec", "ProbeGeometry", "CouplingSpec", "ProtocolParams",
    "PeakMatch", "PeakMatchReport", "RunManifest",
    "ExperimentConfig", "GridSpec", "MonteCarloSpec", "Scenario", "ScenarioKind",
    "load_experiment",
]
