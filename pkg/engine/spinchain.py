"""
Hilbert-space core for the superlattice Heisenberg chain.

Basis convention: computational z-basis of 2^n states ordered as in
``np.kron(site_0, site_1, ...)``, i.e. site 0 is the most significant bit of the
basis index and a set bit means j^z = +1/2.
"""
import logging
from dataclasses import dataclass, field
from functools import reduce
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse

from config import settings
from models import SpinChainSpec
from .errors import CapacityError

logger = logging.getLogger(__name__)

Operator = Union[np.ndarray, scipy.sparse.spmatrix]


def check_capacity(n_sites: int) -> None:
    if n_sites > settings.MAX_SITES:
        raise CapacityError(n_sites, settings.MAX_SITES)


def site_bits(n_sites: int) -> np.ndarray:
    """Occupation table of shape (2^n, n): entry [s, b] is 1 when site b is up in state s."""
    index = np.arange(2 ** n_sites, dtype=np.int64)
    shifts = np.arange(n_sites - 1, -1, -1, dtype=np.int64)
    return ((index[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def sz_diagonal(n_sites: int, site: int) -> np.ndarray:
    """Diagonal of j^z on one site."""
    shift = n_sites - 1 - site
    index = np.arange(2 ** n_sites, dtype=np.int64)
    return ((index >> shift) & 1) - 0.5


def total_sz_diagonal(n_sites: int) -> np.ndarray:
    return site_bits(n_sites).sum(axis=1) - n_sites / 2.0


def magnetization_sectors(n_sites: int) -> Dict[int, np.ndarray]:
    """Basis indices grouped by number of up spins."""
    popcount = site_bits(n_sites).sum(axis=1)
    return {int(m): np.flatnonzero(popcount == m) for m in np.unique(popcount)}


@dataclass(frozen=True, eq=False)
class ManyBodyState:
    """Normalized amplitude vector over the z-basis.

    Index bits follow the kron product order: site 0 is the most significant
    bit, site n-1 the least significant, and a set bit is j^z = +1/2.
    """

    amplitudes: np.ndarray
    n_sites: int
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.amplitudes.shape != (2 ** self.n_sites,):
            raise ValueError(
                f"amplitude vector of shape {self.amplitudes.shape} does not match "
                f"{self.n_sites} sites"
            )
        if abs(self.norm() - 1.0) > 1e-12:
            raise ValueError(f"state is not normalized (norm {self.norm():.15g})")

    @classmethod
    def from_vector(cls, vector: np.ndarray, n_sites: int, **metadata) -> "ManyBodyState":
        vector = np.asarray(vector, dtype=complex)
        norm = np.linalg.norm(vector)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(amplitudes=vector / norm, n_sites=n_sites, metadata=dict(metadata))

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def expectation(self, operator: Operator) -> complex:
        """<psi|O|psi>; a 1-d array is read as a diagonal operator."""
        psi = self.amplitudes
        if isinstance(operator, np.ndarray) and operator.ndim == 1:
            return complex(np.vdot(psi, operator * psi))
        return complex(np.vdot(psi, operator @ psi))


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Ascending eigenvalues and eigenvector columns of a many-body Hamiltonian.

    Block-wise decompositions also record, for every total-S^z sector, the z-basis
    indices it spans and the positions of its levels in ``eigenvalues``.
    """

    eigenvalues: np.ndarray
    eigenvectors: Operator
    block_wise: bool = False
    sectors: Tuple[Tuple[np.ndarray, np.ndarray], ...] = ()

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def spectral_norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def dense_eigenvectors(self) -> np.ndarray:
        limit = 2 ** settings.DENSE_SITE_LIMIT
        if self.dim > limit:
            raise ValueError(
                f"dense {self.dim}x{self.dim} matrices are limited to dimension {limit}; "
                "propagate vectors instead"
            )
        if scipy.sparse.issparse(self.eigenvectors):
            return self.eigenvectors.toarray()
        return self.eigenvectors

    def to_eigenbasis(self, vectors: np.ndarray) -> np.ndarray:
        """Coefficients <E_n|v> for a vector or a matrix of column vectors."""
        return self.eigenvectors.conj().T @ vectors

    def from_eigenbasis(self, coefficients: np.ndarray) -> np.ndarray:
        return self.eigenvectors @ coefficients

    def phases(self, t: float) -> np.ndarray:
        return np.exp(-1j * self.eigenvalues * t)

    def propagator(self, t: float) -> np.ndarray:
        """Dense U(t) = V exp(-iEt) V^dagger."""
        vectors = self.dense_eigenvectors()
        return (vectors * self.phases(t)[None, :]) @ vectors.conj().T

    def reconstruct(self) -> np.ndarray:
        vectors = self.dense_eigenvectors()
        return (vectors * self.eigenvalues[None, :]) @ vectors.conj().T


def build_hamiltonian(spec: SpinChainSpec) -> scipy.sparse.csr_matrix:
    """Sum of g * j_a . j_b over the chain bonds, as a real symmetric sparse matrix."""
    check_capacity(spec.n_sites)
    n_sites = spec.n_sites
    dim = spec.dim
    index = np.arange(dim, dtype=np.int64)

    diagonal = np.zeros(dim)
    rows, cols, values = [], [], []
    for site_a, site_b, coupling in spec.bonds():
        if coupling == 0.0:
            continue
        shift_a = n_sites - 1 - site_a
        shift_b = n_sites - 1 - site_b
        bit_a = (index >> shift_a) & 1
        bit_b = (index >> shift_b) & 1
        # j^z j^z
        diagonal += coupling * np.where(bit_a == bit_b, 0.25, -0.25)
        # (j^+ j^- + j^- j^+) / 2 flips antiparallel pairs
        antiparallel = np.flatnonzero(bit_a != bit_b)
        rows.append(antiparallel)
        cols.append(antiparallel ^ ((1 << shift_a) | (1 << shift_b)))
        values.append(np.full(antiparallel.size, 0.5 * coupling))

    if rows:
        hopping = scipy.sparse.coo_matrix(
            (np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))),
            shape=(dim, dim),
        )
    else:
        hopping = scipy.sparse.coo_matrix((dim, dim))
    hamiltonian = (hopping + scipy.sparse.diags(diagonal)).tocsr()
    hamiltonian.sum_duplicates()
    logger.debug("Built H for %d sites, nnz=%d", n_sites, hamiltonian.nnz)
    return hamiltonian


def _asymmetry(matrix: Operator) -> float:
    difference = matrix - matrix.conj().T
    if scipy.sparse.issparse(difference):
        return float(abs(difference).max()) if difference.nnz else 0.0
    return float(np.max(np.abs(difference))) if difference.size else 0.0


def _n_sites_of(dim: int) -> int:
    n_sites = int(round(np.log2(dim)))
    if 2 ** n_sites != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n_sites


def diagonalize(
    hamiltonian: Operator,
    block_wise: Optional[bool] = None,
) -> SpectralDecomposition:
    """Full eigendecomposition, dense or block-wise over total-S^z sectors."""
    asymmetry = _asymmetry(hamiltonian)
    if asymmetry > settings.HERMITICITY_TOL:
        raise ValueError(f"matrix is not Hermitian (max asymmetry {asymmetry:.3e})")

    n_sites = _n_sites_of(hamiltonian.shape[0])
    check_capacity(n_sites)
    if block_wise is None:
        block_wise = n_sites > settings.DENSE_SITE_LIMIT

    if not block_wise:
        dense = hamiltonian.toarray() if scipy.sparse.issparse(hamiltonian) else np.asarray(hamiltonian)
        eigenvalues, eigenvectors = scipy.linalg.eigh(dense)
        logger.info("Dense diagonalization of dimension %d", dense.shape[0])
        return SpectralDecomposition(eigenvalues=eigenvalues, eigenvectors=eigenvectors)

    sparse_h = scipy.sparse.csr_matrix(hamiltonian)
    dim = sparse_h.shape[0]
    all_values, rows, cols, entries, spans = [], [], [], [], []
    offset = 0
    for magnetization, indices in magnetization_sectors(n_sites).items():
        block = sparse_h[indices][:, indices].toarray()
        values, vectors = scipy.linalg.eigh(block)
        logger.debug("Sector %d: block dimension %d", magnetization, indices.size)
        all_values.append(values)
        local_rows, local_cols = np.meshgrid(indices, np.arange(values.size) + offset, indexing="ij")
        rows.append(local_rows.ravel())
        cols.append(local_cols.ravel())
        entries.append(vectors.ravel())
        spans.append((indices, offset + np.arange(values.size)))
        offset += values.size

    eigenvalues = np.concatenate(all_values)
    order = np.argsort(eigenvalues, kind="stable")
    position = np.empty_like(order)
    position[order] = np.arange(order.size)
    eigenvectors = scipy.sparse.csc_matrix(
        (np.concatenate(entries), (np.concatenate(rows), position[np.concatenate(cols)])),
        shape=(dim, dim),
    )
    eigenvectors.eliminate_zeros()
    logger.info("Block-wise diagonalization of dimension %d over %d sectors",
                dim, len(all_values))
    return SpectralDecomposition(
        eigenvalues=eigenvalues[order],
        eigenvectors=eigenvectors,
        block_wise=True,
        sectors=tuple((indices, position[local]) for indices, local in spans),
    )


def ground_state(
    spec: SpinChainSpec,
    decomp: Optional[SpectralDecomposition] = None,
) -> ManyBodyState:
    """Lowest eigenvector; ``metadata['degenerate']`` flags a degenerate ground level."""
    if decomp is None:
        decomp = diagonalize(build_hamiltonian(spec))
    energies = decomp.eigenvalues
    tolerance = settings.DEGENERACY_REL_TOL * decomp.spectral_norm
    gap = float(energies[1] - energies[0])
    degeneracy = int(np.count_nonzero(energies - energies[0] <= tolerance))
    degenerate = degeneracy > 1
    if degenerate:
        logger.warning("Ground level is %d-fold degenerate; using the lowest-index eigenvector",
                       degeneracy)

    column = decomp.eigenvectors[:, 0]
    vector = column.toarray().ravel() if scipy.sparse.issparse(column) else np.asarray(column)
    return ManyBodyState.from_vector(
        vector,
        spec.n_sites,
        energy=float(energies[0]),
        gap=gap,
        degenerate=degenerate,
        degeneracy=degeneracy,
    )


def singlet_product_state(n_sites: int) -> ManyBodyState:
    """Product of singlets (|up,down> - |down,up>)/sqrt(2) on the bonds (2n, 2n+1)."""
    if n_sites < 2 or n_sites % 2:
        raise ValueError(f"singlet product needs an even number of sites, got {n_sites}")
    check_capacity(n_sites)
    singlet = np.array([0.0, -1.0, 1.0, 0.0]) / np.sqrt(2.0)
    vector = reduce(np.kron, [singlet] * (n_sites // 2))
    return ManyBodyState.from_vector(vector, n_sites, kind="singlet_product")


def evolve_vector(vector: np.ndarray, decomp: SpectralDecomposition, t: float) -> np.ndarray:
    """exp(-iHt) applied to a raw vector (or to each column of a matrix)."""
    coefficients = decomp.to_eigenbasis(vector)
    phases = decomp.phases(t)
    if coefficients.ndim == 2:
        phases = phases[:, None]
    return decomp.from_eigenbasis(phases * coefficients)


def evolve(state: ManyBodyState, decomp: SpectralDecomposition, t: float) -> ManyBodyState:
    amplitudes = evolve_vector(state.amplitudes, decomp, t)
    return ManyBodyState(amplitudes=amplitudes, n_sites=state.n_sites,
                         metadata={**state.metadata, "t": t})


def heisenberg(operator: Operator, decomp: SpectralDecomposition, t: float) -> np.ndarray:
    """U^dagger(t) O U(t) as a dense matrix; a 1-d array is read as a diagonal operator.

    Limited to dimensions of the dense path; larger chains go through ``evolve``.
    """
    propagator = decomp.propagator(t)
    if isinstance(operator, np.ndarray) and operator.ndim == 1:
        evolved = operator[:, None] * propagator
    else:
        evolved = operator @ propagator
    return propagator.conj().T @ np.asarray(evolved)
