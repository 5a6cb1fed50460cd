from enum import Enum
from typing import List, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator


class Boundary(str, Enum):
    PERIODIC = "periodic"
    OPEN = "open"


class SpinChainSpec(BaseModel):
    """Coupled double-well (superlattice) Heisenberg chain of spin-1/2 sites."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {"n_sites": 12, "g1": 1.0, "g2": 1.0, "boundary": "periodic"}
        },
    )

    n_sites: int = Field(..., ge=2, description="Number of sites, even")
    g1: float = Field(default=1.0, description="Coupling on bonds (2n, 2n+1)")
    g2: float = Field(default=1.0, description="Coupling on bonds (2n+1, 2n+2)")
    boundary: Boundary = Field(default=Boundary.PERIODIC,
                               description="periodic closes the last g2 bond")

    @field_validator("n_sites")
    @classmethod
    def _even_sites(cls, value: int) -> int:
        if value % 2:
            raise ValueError(f"n_sites must be even, got {value}")
        return value

    @property
    def dim(self) -> int:
        return 2 ** self.n_sites

    def bonds(self) -> List[Tuple[int, int, float]]:
        """(site_a, site_b, coupling) for every bond of the chain."""
        half = self.n_sites // 2
        bonds = [(2 * n, 2 * n + 1, self.g1) for n in range(half)]
        for n in range(half):
            right = 2 * n + 2
            if right == self.n_sites:
                if self.boundary is Boundary.OPEN:
                    continue
                right = 0
            bonds.append((2 * n + 1, right, self.g2))
        return bonds

    def with_couplings(self, g1: float, g2: float) -> "SpinChainSpec":
        return self.model_copy(update={"g1": g1, "g2": g2})
