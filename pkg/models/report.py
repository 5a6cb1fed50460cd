from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


def utc_now() -> datetime:
    """Get current UTC datetime."""
    return datetime.now(timezone.utc)


class PeakMatch(BaseModel):
    """One detected spectral peak and the energy gap nearest to it."""

    omega: float = Field(..., description="Peak frequency (units g)")
    amplitude: float = Field(..., description="Spectral amplitude at the peak")
    nearest_gap: Optional[float] = Field(None, description="Closest E_n - E_0")
    distance: Optional[float] = Field(None, description="|omega - nearest_gap|")
    matched: bool = Field(..., description="distance within tolerance")


class PeakMatchReport(BaseModel):
    """Peaks of a spectrum checked against the exact excitation gaps."""

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "tolerance": 0.0314,
                "matches": [
                    {"omega": 0.71, "amplitude": 3.2, "nearest_gap": 0.712,
                     "distance": 0.002, "matched": True}
                ],
                "matched_fraction": 1.0,
                "unmatched": [],
            }
        }
    )

    tolerance: float = Field(..., description="Matching tolerance (units g)")
    matches: List[PeakMatch] = Field(default_factory=list)
    matched_fraction: float = Field(..., ge=0.0, le=1.0)
    unmatched: List[float] = Field(default_factory=list,
                                   description="Frequencies of unmatched peaks")

    @property
    def all_matched(self) -> bool:
        return not self.unmatched

    def summary(self) -> str:
        return (
            f"{len(self.matches)} peaks, {self.matched_fraction:.0%} matched "
            f"within {self.tolerance:.4g}"
        )


class RunManifest(BaseModel):
    """Structured record written next to the CSV outputs of a run."""

    app: str
    version: str
    command: str
    created_at: datetime = Field(default_factory=utc_now)
    wall_clock_sec: float = Field(..., ge=0.0)
    seed: Optional[int] = None
    config: Dict[str, Any] = Field(default_factory=dict, description="Echo of the validated config")
    eigenvalues: List[float] = Field(default_factory=list)
    ground_energy: float
    gap: float
    degenerate: bool
    diagonalization: str = Field(..., description="dense or block-wise")
    signal_scale: float = Field(..., description="sqrt(eta_mem) applied to the memory signal")
    noise: Dict[str, Optional[float]] = Field(default_factory=dict)
    storage_ok: bool = True
    time_unit_ms: float
    variance_ratio: Optional[float] = Field(
        None, description="Sample variance of F_M over that of F_S")
    peak_match: Optional[PeakMatchReport] = None
    mc_max_abs_z: Optional[float] = Field(
        None, description="Largest |z| of the Monte Carlo oracles (mc-validate)")
    outputs: List[str] = Field(default_factory=list)

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")
