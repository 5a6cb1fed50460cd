import math

from pydantic import BaseModel, ConfigDict, Field


class ProbeGeometry(BaseModel):
    """Standing-wave probe: wavenumber k (units 1/a) and phase shift alpha."""

    model_config = ConfigDict(frozen=True)

    k: float = Field(default=math.pi / 2, description="Probe wavenumber in units of 1/a")
    alpha: float = Field(default=0.0, description="Shift between standing wave and lattice (rad)")
    n_sites: int = Field(..., ge=1, description="Number of lattice sites probed")

    @property
    def k_over_pi(self) -> float:
        return self.k / math.pi
