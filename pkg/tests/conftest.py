import math
from dataclasses import dataclass

import numpy as np
import pytest

from engine.probe import ProbeObservable, build_probe
from engine.spinchain import (
    ManyBodyState,
    SpectralDecomposition,
    build_hamiltonian,
    diagonalize,
    ground_state,
)
from models import Boundary, ProbeGeometry, SpinChainSpec


@dataclass
class Instance:
    spec: SpinChainSpec
    decomp: SpectralDecomposition
    state: ManyBodyState
    observable: ProbeObservable


def random_state(rng: np.random.Generator, n_sites: int) -> ManyBodyState:
    dim = 2 ** n_sites
    vector = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return ManyBodyState.from_vector(vector, n_sites)


def random_instance(rng: np.random.Generator, n_sites: int = 4) -> Instance:
    spec = SpinChainSpec(
        n_sites=n_sites,
        g1=float(rng.uniform(0.2, 2.0)),
        g2=float(rng.uniform(0.0, 2.0)),
        boundary=Boundary.PERIODIC if rng.random() < 0.5 else Boundary.OPEN,
    )
    geometry = ProbeGeometry(
        k=float(rng.uniform(0.0, math.pi)),
        alpha=float(rng.uniform(0.0, math.pi)),
        n_sites=n_sites,
    )
    return Instance(
        spec=spec,
        decomp=diagonalize(build_hamiltonian(spec)),
        state=random_state(rng, n_sites),
        observable=build_probe(geometry),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def two_site():
    """Single bond g1 = 1 in its singlet ground state, probed with c = (2, 0)."""
    spec = SpinChainSpec(n_sites=2, g1=1.0, g2=0.0, boundary=Boundary.OPEN)
    decomp = diagonalize(build_hamiltonian(spec))
    return Instance(
        spec=spec,
        decomp=decomp,
        state=ground_state(spec, decomp),
        observable=build_probe(ProbeGeometry(n_sites=2)),
    )


@pytest.fixture
def four_site(rng):
    return random_instance(rng, 4)


@pytest.fixture
def ring_ground():
    """Eight-site uniform ring in its ground state."""
    spec = SpinChainSpec(n_sites=8, g1=1.0, g2=1.0)
    decomp = diagonalize(build_hamiltonian(spec))
    return Instance(
        spec=spec,
        decomp=decomp,
        state=ground_state(spec, decomp),
        observable=build_probe(ProbeGeometry(n_sites=8)),
    )


@pytest.fixture
def make_instance(rng):
    """Factory of random chains, probes and states sharing the test's generator."""
    return lambda n_sites=4: random_instance(rng, n_sites)
