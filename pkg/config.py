from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application configuration settings."""

    model_config = SettingsConfigDict(
        env_prefix="QMAP_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application
    APP_NAME: str = Field(default="QMAP Simulator",
                          description="Application name")
    VERSION: str = Field(default="1.0.0", description="Version written to run manifests")
    LOG_LEVEL: str = Field(default="INFO", description="Root logging level")
    OUTPUT_DIR: str = Field(
        default="./results",
        description="Default directory for run outputs (QMAP_OUTPUT_DIR)"
    )

    # Hilbert space capacity
    MAX_SITES: int = Field(
        default=20,
        description="Largest chain accepted by the Hamiltonian builder"
    )
    DENSE_SITE_LIMIT: int = Field(
        default=14,
        description="Chains above this size are diagonalized block-wise in total S^z"
    )

    # Numerical tolerances
    HERMITICITY_TOL: float = Field(
        default=1e-10,
        description="Maximum |H - H^dagger| entry accepted by diagonalize"
    )
    DEGENERACY_REL_TOL: float = Field(
        default=1e-9,
        description="Ground-state degeneracy tolerance in units of the spectral norm"
    )
    GROUP_TOL: float = Field(
        default=1e-9,
        description="Eigenvalue grouping tolerance for the probe, in units of max|diag|"
    )
    ZERO_PROBABILITY: float = Field(
        default=1e-14,
        description="Born probabilities below this are treated as zero"
    )
    SUPPORT_CUTOFF: float = Field(
        default=1e-14,
        description="Eigenbasis amplitudes below this are dropped from batched propagation"
    )
    GAP_MERGE_TOL: float = Field(
        default=1e-9,
        description="Energy differences closer than this are merged into one stick"
    )
    TIME_CHUNK: int = Field(
        default=256,
        description="Number of time points propagated per batched matrix product"
    )

    # Spectral analysis defaults
    T_MAX: float = Field(default=200.0, description="Time window in units of 1/g")
    N_SAMPLES: int = Field(default=2048, description="Samples on [0, T_MAX]")
    WINDOW: str = Field(default="hann", description="Window function: hann or rect")
    REL_THRESHOLD: float = Field(
        default=0.1,
        description="Peak threshold relative to the maximum amplitude"
    )
    OMEGA_MIN_FACTOR: float = Field(
        default=2.0,
        description="Peaks below OMEGA_MIN_FACTOR * resolution are discarded"
    )

    # Protocol defaults
    KAPPA1: float = Field(default=10.0, description="First probe coupling")
    KAPPA2: float = Field(default=10.0, description="Second probe coupling")
    KAPPA_R: float = Field(default=2.0, description="Memory read coupling")
    KAPPA_W: float = Field(default=2.0, description="Memory write coupling")

    # Monte Carlo
    MC_SHOTS: int = Field(default=100_000, description="Default number of shots")
    MC_SEED: int = Field(default=0, description="Default root seed")
    MC_BLOCK_SIZE: int = Field(
        default=10_000,
        description="Shots per independently seeded block"
    )


# Global settings instance
settings = Settings()
