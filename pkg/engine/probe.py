import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse

from config import settings
from models import ProbeGeometry
from .spinchain import ManyBodyState, Operator, SpectralDecomposition, magnetization_sectors, site_bits

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EigenGroup:
    """One eigenvalue a_i of the probe and the z-basis indices of its projector."""

    value: float
    indices: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.indices.size)


@dataclass(frozen=True, eq=False)
class ProbeObservable:
    """Diagonal modulated magnetization with its projector decomposition."""

    diag: np.ndarray
    groups: List[EigenGroup]
    group_tol: float
    coefficients: np.ndarray
    n_sites: int
    ambiguous: bool = False

    @property
    def values(self) -> np.ndarray:
        return np.array([group.value for group in self.groups])

    @property
    def max_abs_value(self) -> float:
        return float(np.max(np.abs(self.values)))

    def matrix(self) -> scipy.sparse.csr_matrix:
        return scipy.sparse.diags(self.diag).tocsr()

    def reconstruct(self) -> np.ndarray:
        """Diagonal of sum_i a_i P_i."""
        diag = np.empty_like(self.diag)
        for group in self.groups:
            diag[group.indices] = group.value
        return diag


@dataclass(frozen=True, eq=False)
class RestrictedProbe:
    """Rows x columns of J in the eigenbasis, kept as one dense piece per sector.

    Each piece is (row positions, column positions, matrix); entries between
    different sectors vanish and are never stored.
    """

    shape: Tuple[int, int]
    pieces: Tuple[Tuple[np.ndarray, np.ndarray, np.ndarray], ...]

    def __matmul__(self, vectors: np.ndarray) -> np.ndarray:
        vectors = np.asarray(vectors)
        result = np.zeros((self.shape[0],) + vectors.shape[1:], dtype=complex)
        for rows, cols, matrix in self.pieces:
            result[rows] += matrix @ vectors[cols]
        return result

    def toarray(self) -> np.ndarray:
        dense = np.zeros(self.shape, dtype=complex)
        for rows, cols, matrix in self.pieces:
            dense[np.ix_(rows, cols)] = matrix
        return dense


@dataclass(frozen=True, eq=False)
class EigenbasisProbe:
    """<E_n|J|E_m> stored block-diagonally over the total-S^z sectors.

    J and H both conserve total S^z, so the matrix has no entries between
    levels of different sectors. A dense decomposition is a single block.
    """

    blocks: Tuple[Tuple[np.ndarray, np.ndarray], ...]
    sector_of: np.ndarray
    local_of: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.sector_of.size)

    def __matmul__(self, vectors: np.ndarray) -> np.ndarray:
        vectors = np.asarray(vectors)
        result = np.zeros(vectors.shape, dtype=complex)
        for levels, matrix in self.blocks:
            result[levels] = matrix @ vectors[levels]
        return result

    def coupled(self, levels: Sequence[int]) -> np.ndarray:
        """Sorted levels sharing a sector with any of ``levels``."""
        touched = np.unique(self.sector_of[np.asarray(levels, dtype=np.int64)])
        touched = touched[touched >= 0]
        if touched.size == 0:
            return np.zeros(0, dtype=np.int64)
        return np.sort(np.concatenate([self.blocks[s][0] for s in touched]))

    def restrict(self, rows: Sequence[int], cols: Sequence[int]) -> RestrictedProbe:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        row_sector = self.sector_of[rows]
        col_sector = self.sector_of[cols]
        pieces = []
        for sector in np.intersect1d(row_sector, col_sector):
            if sector < 0:
                continue
            row_pos = np.flatnonzero(row_sector == sector)
            col_pos = np.flatnonzero(col_sector == sector)
            matrix = self.blocks[sector][1][np.ix_(self.local_of[rows[row_pos]],
                                                   self.local_of[cols[col_pos]])]
            pieces.append((row_pos, col_pos, matrix))
        return RestrictedProbe(shape=(rows.size, cols.size), pieces=tuple(pieces))

    def toarray(self) -> np.ndarray:
        everything = np.arange(self.dim)
        return self.restrict(everything, everything).toarray()


def sector_spans(decomp: SpectralDecomposition) -> Tuple[Tuple[np.ndarray, np.ndarray], ...]:
    """(z-basis indices, level positions) per total-S^z sector of a decomposition.

    Dense decompositions form one span. Sparse eigenvectors without a recorded
    layout are split by their nonzero pattern, which must not mix sectors.
    """
    dim = decomp.dim
    if decomp.sectors:
        return decomp.sectors
    if not scipy.sparse.issparse(decomp.eigenvectors):
        everything = np.arange(dim)
        return ((everything, everything),)

    vectors = scipy.sparse.csr_matrix(decomp.eigenvectors)
    n_sites = int(round(np.log2(dim)))
    spans = []
    claimed = np.zeros(dim, dtype=bool)
    for indices in magnetization_sectors(n_sites).values():
        levels = np.unique(vectors[indices, :].nonzero()[1])
        if np.any(claimed[levels]):
            raise ValueError("eigenvectors mix total-S^z sectors; use a dense decomposition")
        claimed[levels] = True
        spans.append((indices, levels))
    return tuple(spans)


def probe_in_eigenbasis(
    observable: ProbeObservable,
    decomp: SpectralDecomposition,
    state: Optional[ManyBodyState] = None,
) -> EigenbasisProbe:
    """Matrix elements of J between the eigenvectors of H, sector by sector.

    With a state, only the sectors it populates are built; levels elsewhere
    belong to no block and drop out of every product.
    """
    dim = decomp.dim
    vectors = decomp.eigenvectors
    spans = sector_spans(decomp)

    blocks = []
    sector_of = np.full(dim, -1, dtype=np.int64)
    local_of = np.zeros(dim, dtype=np.int64)
    for basis, levels in spans:
        if state is not None and not np.any(state.amplitudes[basis]):
            continue
        if len(spans) == 1:
            local = vectors.toarray() if scipy.sparse.issparse(vectors) else vectors
        else:
            local = vectors[basis, :][:, levels]
            local = local.toarray() if scipy.sparse.issparse(local) else np.asarray(local)
        matrix = local.conj().T @ (observable.diag[basis][:, None] * local)
        sector_of[levels] = len(blocks)
        local_of[levels] = np.arange(levels.size)
        blocks.append((levels, matrix))
    logger.debug("J in the eigenbasis: %d of %d sectors, largest block %d", len(blocks),
                 len(spans), max((levels.size for levels, _ in blocks), default=0))
    return EigenbasisProbe(blocks=tuple(blocks), sector_of=sector_of, local_of=local_of)


def ensure_eigenbasis(
    observable: ProbeObservable,
    decomp: SpectralDecomposition,
    j_eigen: Optional[EigenbasisProbe] = None,
    state: Optional[ManyBodyState] = None,
) -> EigenbasisProbe:
    return probe_in_eigenbasis(observable, decomp, state) if j_eigen is None else j_eigen


def modulation_coefficients(geom: ProbeGeometry) -> np.ndarray:
    """Standing-wave weights c_n = 2 cos^2(k n - alpha), lattice spacing 1."""
    n = np.arange(geom.n_sites)
    return 2.0 * np.cos(geom.k * n - geom.alpha) ** 2


def eigengroups(
    diag: np.ndarray,
    group_tol: Optional[float] = None,
) -> Tuple[List[EigenGroup], bool]:
    """Group equal diagonal values; returns the groups and an ambiguity flag.

    ``group_tol`` is relative to max|diag|. Sorted values split wherever the gap
    reaches the tolerance. The flag is raised when some gap lies within a factor
    of ten of the tolerance, where the split is numerically fragile.
    """
    if group_tol is None:
        group_tol = settings.GROUP_TOL
    scale = float(np.max(np.abs(diag))) if diag.size else 0.0
    tolerance = group_tol * (scale if scale > 0 else 1.0)

    order = np.argsort(diag, kind="stable")
    ordered = diag[order]
    gaps = np.diff(ordered)
    breaks = np.flatnonzero(gaps >= tolerance) + 1
    ambiguous = bool(np.any((gaps > 0.1 * tolerance) & (gaps < 10.0 * tolerance)))
    if ambiguous:
        logger.warning("Probe eigenvalue gaps straddle the grouping tolerance %.3e", tolerance)

    groups = [
        EigenGroup(value=float(np.mean(ordered[chunk[0]:chunk[-1] + 1])),
                   indices=np.sort(order[chunk]))
        for chunk in np.split(np.arange(ordered.size), breaks)
        if chunk.size
    ]
    return groups, ambiguous


def build_J(
    coefficients: np.ndarray,
    n_sites: int,
    group_tol: Optional[float] = None,
) -> ProbeObservable:
    """J = (1/sqrt(N)) sum_n c_n j^z_n with N = n_sites, as a diagonal over the z-basis."""
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.shape != (n_sites,):
        raise ValueError(f"expected {n_sites} coefficients, got {coefficients.shape}")
    if group_tol is None:
        group_tol = settings.GROUP_TOL
    spins = site_bits(n_sites) - 0.5
    diag = spins @ coefficients / np.sqrt(n_sites)
    groups, ambiguous = eigengroups(diag, group_tol)
    logger.debug("Probe on %d sites: %d eigenvalue groups", n_sites, len(groups))
    return ProbeObservable(
        diag=diag,
        groups=groups,
        group_tol=group_tol,
        coefficients=coefficients,
        n_sites=n_sites,
        ambiguous=ambiguous,
    )


def build_probe(geom: ProbeGeometry, group_tol: Optional[float] = None) -> ProbeObservable:
    return build_J(modulation_coefficients(geom), geom.n_sites, group_tol)


def commutator_norm(observable: ProbeObservable, hamiltonian: Operator) -> float:
    """Max-abs entry of [J, H]; for diagonal J the entry (s, t) is (J_s - J_t) H_st."""
    coo = scipy.sparse.coo_matrix(hamiltonian)
    if coo.nnz == 0:
        return 0.0
    entries = (observable.diag[coo.row] - observable.diag[coo.col]) * coo.data
    return float(np.max(np.abs(entries)))
