import numpy as np
import pytest
import scipy.linalg
import scipy.sparse
from numpy.testing import assert_allclose
from pydantic import ValidationError

from config import settings
from engine.errors import CapacityError
from engine.spinchain import (
    ManyBodyState,
    build_hamiltonian,
    diagonalize,
    evolve,
    ground_state,
    heisenberg,
    magnetization_sectors,
    singlet_product_state,
    sz_diagonal,
    total_sz_diagonal,
)
from models import Boundary, SpinChainSpec


class TestSpinChainSpec:
    """Tests for the chain value spec."""

    def test_odd_sites_rejected(self):
        with pytest.raises(ValidationError):
            SpinChainSpec(n_sites=13)

    def test_periodic_bonds(self):
        spec = SpinChainSpec(n_sites=4, g1=1.0, g2=0.5)

        assert spec.bonds() == [(0, 1, 1.0), (2, 3, 1.0), (1, 2, 0.5), (3, 0, 0.5)]

    def test_open_bonds(self):
        spec = SpinChainSpec(n_sites=4, g1=1.0, g2=0.5, boundary=Boundary.OPEN)

        assert spec.bonds() == [(0, 1, 1.0), (2, 3, 1.0), (1, 2, 0.5)]

    def test_with_couplings(self):
        spec = SpinChainSpec(n_sites=6).with_couplings(1.0, 0.0)

        assert (spec.g1, spec.g2, spec.n_sites) == (1.0, 0.0, 6)


class TestHamiltonian:
    """Tests for build_hamiltonian and diagonalize."""

    def test_single_bond_spectrum(self):
        spec = SpinChainSpec(n_sites=2, g1=1.0, g2=0.0, boundary=Boundary.OPEN)

        decomp = diagonalize(build_hamiltonian(spec))

        assert_allclose(decomp.eigenvalues, [-0.75, 0.25, 0.25, 0.25], atol=1e-14)

    def test_four_site_ring_ground_energy(self):
        decomp = diagonalize(build_hamiltonian(SpinChainSpec(n_sites=4)))

        assert decomp.ground_energy == pytest.approx(-2.0, abs=1e-12)

    def test_hermitian_and_sz_conserving(self):
        hamiltonian = build_hamiltonian(SpinChainSpec(n_sites=6, g1=1.0, g2=0.3))
        sz = scipy.sparse.diags(total_sz_diagonal(6))

        assert abs(hamiltonian - hamiltonian.T).max() == 0.0
        assert abs(hamiltonian @ sz - sz @ hamiltonian).max() < 1e-14

    def test_zero_couplings_give_zero_matrix(self):
        hamiltonian = build_hamiltonian(SpinChainSpec(n_sites=4, g1=0.0, g2=0.0))

        assert hamiltonian.nnz == 0

    def test_capacity(self):
        with pytest.raises(CapacityError):
            build_hamiltonian(SpinChainSpec(n_sites=22))

    def test_reconstruction(self, make_instance):
        instance = make_instance(6)
        dense = build_hamiltonian(instance.spec).toarray()

        assert np.max(np.abs(instance.decomp.reconstruct() - dense)) < 1e-10

    def test_block_wise_matches_dense(self):
        hamiltonian = build_hamiltonian(SpinChainSpec(n_sites=8, g1=1.0, g2=0.7))

        dense = diagonalize(hamiltonian, block_wise=False)
        blocks = diagonalize(hamiltonian, block_wise=True)

        assert blocks.block_wise is True
        assert_allclose(blocks.eigenvalues, dense.eigenvalues, atol=1e-10)
        assert np.max(np.abs(blocks.reconstruct() - hamiltonian.toarray())) < 1e-10

    def test_non_hermitian_rejected(self):
        matrix = np.zeros((4, 4))
        matrix[0, 1] = 1.0

        with pytest.raises(ValueError, match="not Hermitian"):
            diagonalize(matrix)


class TestStates:
    """Tests for ground states, singlet products and evolution."""

    def test_two_site_ground_state_is_singlet(self):
        spec = SpinChainSpec(n_sites=2, g1=1.0, g2=0.0, boundary=Boundary.OPEN)

        state = ground_state(spec)
        singlet = np.array([0.0, -1.0, 1.0, 0.0]) / np.sqrt(2.0)

        assert abs(np.vdot(singlet, state.amplitudes)) == pytest.approx(1.0, abs=1e-12)
        assert state.metadata["energy"] == pytest.approx(-0.75)
        assert state.metadata["degenerate"] is False

    def test_degenerate_ground_flagged(self):
        state = ground_state(SpinChainSpec(n_sites=4, g1=0.0, g2=0.0))

        assert state.metadata["degenerate"] is True
        assert state.metadata["degeneracy"] == 16

    def test_singlet_product(self):
        two = singlet_product_state(2)
        four = singlet_product_state(4)

        assert_allclose(two.amplitudes, np.array([0, -1, 1, 0]) / np.sqrt(2.0))
        assert four.norm() == pytest.approx(1.0, abs=1e-14)
        assert four.expectation(total_sz_diagonal(4)) == pytest.approx(0.0, abs=1e-14)

    def test_singlet_product_is_dimer_ground_state(self):
        spec = SpinChainSpec(n_sites=6, g1=1.0, g2=0.0)
        hamiltonian = build_hamiltonian(spec)

        state = singlet_product_state(6)

        assert state.expectation(hamiltonian).real == pytest.approx(-0.75 * 3, abs=1e-12)

    def test_singlet_product_odd_sites(self):
        with pytest.raises(ValueError):
            singlet_product_state(3)

    def test_unnormalized_state_rejected(self):
        with pytest.raises(ValueError, match="normalized"):
            ManyBodyState(amplitudes=np.ones(4, dtype=complex), n_sites=2)

    def test_unitarity_and_energy_conservation(self, make_instance):
        instance = make_instance(6)
        hamiltonian = build_hamiltonian(instance.spec)
        energy = instance.state.expectation(hamiltonian).real

        for t in (0.3, 7.1, 55.0):
            evolved = evolve(instance.state, instance.decomp, t)
            assert abs(evolved.norm() - 1.0) < 1e-12
            assert abs(evolved.expectation(hamiltonian).real - energy) < 1e-10

    def test_heisenberg_picture_matches_schrodinger(self, make_instance):
        instance = make_instance(4)
        operator = sz_diagonal(4, 1)
        t = 2.4

        evolved = evolve(instance.state, instance.decomp, t)
        heisenberg_value = np.vdot(instance.state.amplitudes,
                                   heisenberg(operator, instance.decomp, t) @ instance.state.amplitudes)

        assert heisenberg_value.real == pytest.approx(evolved.expectation(operator).real, abs=1e-12)
        assert_allclose(heisenberg(operator, instance.decomp, 0.0), np.diag(operator), atol=1e-12)

    @pytest.mark.parametrize("n_sites", [2, 4, 6, 8])
    def test_spectral_propagation_matches_matrix_exponential(self, make_instance, n_sites):
        instance = make_instance(n_sites)
        hamiltonian = build_hamiltonian(instance.spec).toarray()

        for t in (0.3, 2.7, 11.0):
            expected = scipy.linalg.expm(-1j * hamiltonian * t) @ instance.state.amplitudes
            evolved = evolve(instance.state, instance.decomp, t)
            assert_allclose(evolved.amplitudes, expected, atol=1e-9)

    def test_dense_matrices_refused_above_dense_limit(self, monkeypatch):
        monkeypatch.setattr(settings, "DENSE_SITE_LIMIT", 2)
        spec = SpinChainSpec(n_sites=4, g1=1.0, g2=0.5)
        decomp = diagonalize(build_hamiltonian(spec), block_wise=True)

        with pytest.raises(ValueError, match="dense"):
            decomp.propagator(1.0)
        with pytest.raises(ValueError, match="dense"):
            heisenberg(sz_diagonal(4, 0), decomp, 1.0)
        evolved = evolve(ground_state(spec, decomp), decomp, 1.0)
        assert evolved.norm() == pytest.approx(1.0, abs=1e-12)

    def test_block_wise_records_sector_layout(self):
        decomp = diagonalize(build_hamiltonian(SpinChainSpec(n_sites=6, g1=1.0, g2=0.4)),
                             block_wise=True)

        levels = np.sort(np.concatenate([levels for _, levels in decomp.sectors]))
        assert np.array_equal(levels, np.arange(64))
        vectors = decomp.eigenvectors.toarray()
        for basis, levels in decomp.sectors:
            outside = np.setdiff1d(np.arange(64), basis)
            assert np.max(np.abs(vectors[np.ix_(outside, levels)]), initial=0.0) == 0.0

    def test_site_zero_is_most_significant_bit(self):
        vector = np.zeros(16)
        vector[1 << 3] = 1.0
        state = ManyBodyState.from_vector(vector, 4)

        assert state.expectation(sz_diagonal(4, 0)).real == pytest.approx(0.5)
        for site in (1, 2, 3):
            assert state.expectation(sz_diagonal(4, site)).real == pytest.approx(-0.5)

    def test_magnetization_sectors_partition_basis(self):
        sectors = magnetization_sectors(6)

        sizes = [indices.size for indices in sectors.values()]
        assert sizes == [1, 6, 15, 20, 15, 6, 1]
        assert np.array_equal(np.sort(np.concatenate(list(sectors.values()))), np.arange(64))
