from .measurement import (
    ShotEstimate,
    mc_f_s,
    mc_homodyne,
    mc_single_probe,
    variance_estimate,
)

__all__ = ["ShotEstimate", "mc_f_s", "mc_homodyne", "mc_single_probe", "variance_estimate"]
