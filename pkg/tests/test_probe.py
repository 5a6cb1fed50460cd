import dataclasses
import math

import numpy as np
import pytest
import scipy.sparse
from numpy.testing import assert_allclose

from engine.probe import (
    build_J,
    build_probe,
    commutator_norm,
    eigengroups,
    modulation_coefficients,
    probe_in_eigenbasis,
)
from engine.spinchain import (
    SpectralDecomposition,
    build_hamiltonian,
    diagonalize,
    ground_state,
    site_bits,
)
from models import ProbeGeometry, SpinChainSpec


class TestModulation:
    """Tests for the standing-wave weights."""

    def test_half_pi_alternates(self):
        coefficients = modulation_coefficients(ProbeGeometry(k=math.pi / 2, n_sites=4))

        assert_allclose(coefficients, [2.0, 0.0, 2.0, 0.0], atol=1e-15)

    def test_phase_shift_moves_nodes(self):
        coefficients = modulation_coefficients(ProbeGeometry(k=math.pi / 2, alpha=math.pi / 2, n_sites=4))

        assert_allclose(coefficients, [0.0, 2.0, 0.0, 2.0], atol=1e-15)

    def test_k_over_pi(self):
        assert ProbeGeometry(n_sites=2).k_over_pi == pytest.approx(0.5)


class TestBuildJ:
    """Tests for the probe observable and its projectors."""

    def test_two_site_diagonal(self):
        observable = build_probe(ProbeGeometry(n_sites=2))
        half = 1.0 / math.sqrt(2.0)

        assert_allclose(observable.diag, [-half, -half, half, half], atol=1e-15)
        assert_allclose(observable.values, [-half, half], atol=1e-15)
        assert [group.dim for group in observable.groups] == [2, 2]
        assert observable.ambiguous is False

    def test_four_site_groups(self):
        observable = build_probe(ProbeGeometry(n_sites=4))

        assert_allclose(observable.values, [-1.0, 0.0, 1.0], atol=1e-14)
        assert [group.dim for group in observable.groups] == [4, 8, 4]

    def test_projectors_reconstruct_diagonal(self, rng):
        observable = build_J(rng.uniform(0.0, 2.0, size=6), 6)

        assert np.max(np.abs(observable.reconstruct() - observable.diag)) <= (
            observable.group_tol * observable.max_abs_value
        )
        covered = np.sort(np.concatenate([group.indices for group in observable.groups]))
        assert np.array_equal(covered, np.arange(64))

    def test_coefficient_shape_checked(self):
        with pytest.raises(ValueError):
            build_J(np.ones(3), 4)

    def test_ambiguous_grouping_flagged(self):
        groups, ambiguous = eigengroups(np.array([0.0, 1.0, 1.0 + 5e-9]), group_tol=1e-9)

        assert ambiguous is True
        assert len(groups) == 3

    def test_uniform_probe_commutes_with_heisenberg_chain(self):
        hamiltonian = build_hamiltonian(SpinChainSpec(n_sites=6, g1=1.0, g2=0.4))
        uniform = build_probe(ProbeGeometry(k=0.0, n_sites=6))
        staggered = build_probe(ProbeGeometry(n_sites=6))

        assert commutator_norm(uniform, hamiltonian) == pytest.approx(0.0, abs=1e-14)
        assert commutator_norm(staggered, hamiltonian) > 0.1

    def test_irrational_wavenumber_matches_exact_grouping(self):
        n_sites = 8
        observable = build_probe(ProbeGeometry(k=1.0, n_sites=n_sites))
        twice_spin = 2 * site_bits(n_sites).astype(int) - 1
        # c_n = 1 + cos(2n) = 1 + T_n(cos 2) with cos 2 transcendental: the Chebyshev
        # coefficients of sum_n c_n s_n identify a value exactly
        exact = {}
        for index, row in enumerate(twice_spin):
            key = (int(row.sum() + row[0]),) + tuple(int(v) for v in row[1:])
            exact.setdefault(key, []).append(index)

        found = sorted(tuple(int(i) for i in group.indices) for group in observable.groups)

        assert found == sorted(tuple(indices) for indices in exact.values())


class TestEigenbasis:
    """Matrix elements of J between eigenvectors of H."""

    @staticmethod
    def rotate_back(decomp, j_eigen):
        vectors = decomp.eigenvectors
        vectors = vectors.toarray() if scipy.sparse.issparse(vectors) else vectors
        return vectors @ j_eigen.toarray() @ vectors.conj().T

    def test_dense_and_block_wise_reproduce_j(self):
        hamiltonian = build_hamiltonian(SpinChainSpec(n_sites=6, g1=1.0, g2=0.3))
        observable = build_probe(ProbeGeometry(k=0.7, alpha=0.4, n_sites=6))

        for block_wise in (False, True):
            decomp = diagonalize(hamiltonian, block_wise=block_wise)
            j_eigen = probe_in_eigenbasis(observable, decomp)
            assert_allclose(self.rotate_back(decomp, j_eigen), np.diag(observable.diag), atol=1e-12)

        assert len(probe_in_eigenbasis(observable, decomp).blocks) == 7

    def test_blocks_are_hermitian(self):
        decomp = diagonalize(build_hamiltonian(SpinChainSpec(n_sites=4)), block_wise=True)
        j_eigen = probe_in_eigenbasis(build_probe(ProbeGeometry(n_sites=4)), decomp)

        for _, matrix in j_eigen.blocks:
            assert_allclose(matrix, matrix.conj().T, atol=1e-14)

    def test_only_populated_sectors_are_built(self):
        spec = SpinChainSpec(n_sites=6, g1=1.0, g2=0.5)
        decomp = diagonalize(build_hamiltonian(spec), block_wise=True)
        observable = build_probe(ProbeGeometry(n_sites=6))

        j_eigen = probe_in_eigenbasis(observable, decomp, ground_state(spec, decomp))

        assert len(j_eigen.blocks) == 1
        assert j_eigen.blocks[0][0].size == 20
        assert np.count_nonzero(j_eigen.sector_of >= 0) == 20

    def test_restriction_matches_dense_submatrix(self, rng):
        decomp = diagonalize(build_hamiltonian(SpinChainSpec(n_sites=6, g1=0.8, g2=1.1)),
                             block_wise=True)
        j_eigen = probe_in_eigenbasis(build_probe(ProbeGeometry(k=1.3, n_sites=6)), decomp)
        rows = np.sort(rng.choice(64, size=17, replace=False))
        cols = np.sort(rng.choice(64, size=23, replace=False))
        vectors = rng.normal(size=(23, 3))

        restricted = j_eigen.restrict(rows, cols)

        full = j_eigen.toarray()
        assert_allclose(restricted.toarray(), full[np.ix_(rows, cols)], atol=1e-14)
        assert_allclose(restricted @ vectors, full[np.ix_(rows, cols)] @ vectors, atol=1e-12)

    def test_mixed_sparse_eigenvectors_rejected(self):
        mixing = np.eye(4)
        mixing[[1, 2], 0] = [0.6, 0.8]
        decomp = SpectralDecomposition(
            eigenvalues=np.zeros(4),
            eigenvectors=scipy.sparse.csc_matrix(mixing),
            block_wise=True,
        )

        with pytest.raises(ValueError, match="mix"):
            probe_in_eigenbasis(build_probe(ProbeGeometry(n_sites=2)), decomp)

    def test_observable_reused_across_decompositions(self):
        observable = build_probe(ProbeGeometry(n_sites=4))
        first = diagonalize(build_hamiltonian(SpinChainSpec(n_sites=4, g1=1.0, g2=0.2)))
        second = diagonalize(build_hamiltonian(SpinChainSpec(n_sites=4, g1=0.3, g2=1.0)))

        for decomp in (first, second, first):
            j_eigen = probe_in_eigenbasis(observable, decomp)
            assert_allclose(self.rotate_back(decomp, j_eigen), np.diag(observable.diag), atol=1e-12)
        assert set(vars(observable)) == {field.name for field in dataclasses.fields(observable)}
        with pytest.raises(dataclasses.FrozenInstanceError):
            observable.diag = observable.diag * 2.0
