import math
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class CouplingSpec(BaseModel):
    """Light-matter coupling from optical depth and spontaneous emission probability."""

    model_config = ConfigDict(frozen=True)

    d: float = Field(..., gt=0, description="Optical depth")
    eta_A: float = Field(..., gt=0, le=1, description="Spontaneous emission probability")

    @property
    def kappa(self) -> float:
        return math.sqrt(self.d * self.eta_A)


class ProtocolParams(BaseModel):
    """Couplings of the two probe passes and the memory, plus the memory loss model."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "kappa1": 10.0, "kappa2": 10.0, "kappa_r": 2.0, "kappa_w": 2.0,
                "eta_mem": 0.9025, "compensate_loss": False,
            }
        },
    )

    kappa1: float = Field(..., gt=0, description="Probe coupling of the first light pulse")
    kappa2: float = Field(..., gt=0, description="Probe coupling of the second light pulse")
    kappa_r: float = Field(..., gt=0, description="Memory read coupling")
    kappa_w: float = Field(..., gt=0, description="Memory write coupling")
    eta_mem: float = Field(default=1.0, gt=0, le=1, description="Memory transmission")
    compensate_loss: bool = Field(
        default=False,
        description="Rescale the recovered signal by 1/sqrt(eta_mem)"
    )
    storage_time: Optional[float] = Field(
        default=None, gt=0,
        description="Memory storage time in units of 1/g (None: unlimited)"
    )
    g_inverse_ms: float = Field(default=10.0, gt=0,
                                description="Time unit 1/g expressed in milliseconds")

    @model_validator(mode="after")
    def _finite_total(self) -> "ProtocolParams":
        if not math.isfinite(self.kappa_t):
            raise ValueError("kappa_T overflows")
        return self

    @classmethod
    def from_couplings(
        cls,
        probe1: CouplingSpec,
        probe2: CouplingSpec,
        read: CouplingSpec,
        write: CouplingSpec,
        **kwargs,
    ) -> "ProtocolParams":
        return cls(
            kappa1=probe1.kappa,
            kappa2=probe2.kappa,
            kappa_r=read.kappa,
            kappa_w=write.kappa,
            **kwargs,
        )

    @property
    def kappa_t(self) -> float:
        return self.kappa1 * self.kappa2 * self.kappa_r * self.kappa_w

    @property
    def signal_scale(self) -> float:
        """Factor multiplying the memory-borne Ĵ(0) coefficient."""
        return math.sqrt(self.eta_mem)

    @property
    def noise_floor(self) -> float:
        """Vacuum contribution to the measured variance, loss included."""
        kr2 = self.kappa_r ** 2
        return (1.0 + kr2 + self.eta_mem * kr2 * self.kappa_w ** 2) / 2.0
