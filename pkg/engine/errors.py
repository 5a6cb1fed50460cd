from typing import Optional


class QmapError(Exception):
    """Base class for simulator errors."""


class CapacityError(QmapError):
    """Requested Hilbert space exceeds the configured site cap."""

    def __init__(self, n_sites: int, max_sites: int):
        self.n_sites = n_sites
        self.max_sites = max_sites
        super().__init__(
            f"{n_sites} sites exceeds the configured cap of {max_sites} "
            f"(dimension 2^{n_sites})"
        )


class StructuralError(QmapError):
    """A linear form references something the circuit never registered."""


class ConfigError(QmapError):
    """Invalid experiment file or command-line override."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        self.message = message
        super().__init__(self.render())

    def render(self) -> str:
        if self.path and self.line:
            return f"{self.path}:{self.line}: {self.message}"
        if self.path:
            return f"{self.path}: {self.message}"
        return self.message
