import configparser
import math
import re
from enum import Enum
from pathlib import Path
from typing import Dict, Literal, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config import settings
from engine.errors import ConfigError
from .chain import SpinChainSpec
from .probe import ProbeGeometry
from .protocol import ProtocolParams


class ScenarioKind(str, Enum):
    EQUILIBRIUM = "equilibrium"
    QUENCH = "quench"


class Scenario(BaseModel):
    """Initial state: the ground state of H, or a state prepared under other couplings."""

    model_config = ConfigDict(frozen=True)

    kind: ScenarioKind = Field(default=ScenarioKind.EQUILIBRIUM)
    g1_init: Optional[float] = Field(None, description="g1 before the quench")
    g2_init: Optional[float] = Field(None, description="g2 before the quench")

    @model_validator(mode="after")
    def _quench_couplings(self) -> "Scenario":
        if self.kind is ScenarioKind.QUENCH and (self.g1_init is None or self.g2_init is None):
            raise ValueError("a quench needs both g1_init and g2_init")
        return self


class GridSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    t_max: float = Field(default_factory=lambda: settings.T_MAX, gt=0, description="Units of 1/g")
    n_samples: int = Field(default_factory=lambda: settings.N_SAMPLES, ge=2)
    window: Literal["rect", "hann"] = Field(default_factory=lambda: settings.WINDOW)
    rel_threshold: float = Field(default_factory=lambda: settings.REL_THRESHOLD, gt=0, lt=1)
    omega_min_factor: float = Field(default_factory=lambda: settings.OMEGA_MIN_FACTOR, ge=0)

    @property
    def resolution(self) -> float:
        return 2.0 * math.pi / self.t_max


class MonteCarloSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    shots: int = Field(default_factory=lambda: settings.MC_SHOTS, ge=2)
    seed: int = Field(default_factory=lambda: settings.MC_SEED, ge=0)
    points: int = Field(default=5, ge=1, description="Number of thinned times with error bars")


class ExperimentConfig(BaseModel):
    """Everything a run needs: chain, probe, protocol, scenario, grid and outputs."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "chain": {"n_sites": 12, "g1": 1.0, "g2": 1.0, "boundary": "periodic"},
                "probe": {"k": 1.5707963267948966, "alpha": 0.0, "n_sites": 12},
                "protocol": {"kappa1": 10.0, "kappa2": 10.0, "kappa_r": 2.0, "kappa_w": 2.0},
                "scenario": {"kind": "equilibrium"},
                "grid": {"t_max": 200.0, "n_samples": 2048},
                "outputs": "./results/ring12",
            }
        },
    )

    chain: SpinChainSpec
    probe: ProbeGeometry
    protocol: ProtocolParams
    scenario: Scenario = Field(default_factory=Scenario)
    grid: GridSpec = Field(default_factory=GridSpec)
    mc: Optional[MonteCarloSpec] = None
    outputs: Path = Field(default_factory=lambda: Path(settings.OUTPUT_DIR))

    @model_validator(mode="after")
    def _consistent(self) -> "ExperimentConfig":
        if self.probe.n_sites != self.chain.n_sites:
            raise ValueError(
                f"probe covers {self.probe.n_sites} sites but the chain has {self.chain.n_sites}"
            )
        if self.scenario.kind is ScenarioKind.QUENCH:
            if (self.scenario.g1_init, self.scenario.g2_init) == (self.chain.g1, self.chain.g2):
                raise ValueError("quench initial couplings equal the evolution couplings")
        return self

    @property
    def initial_chain(self) -> SpinChainSpec:
        if self.scenario.kind is ScenarioKind.QUENCH:
            return self.chain.with_couplings(self.scenario.g1_init, self.scenario.g2_init)
        return self.chain


# --- experiment files -------------------------------------------------------

SECTIONS = ("chain", "probe", "protocol", "scenario", "grid", "mc", "output")

KEYS: Dict[str, Tuple[str, ...]] = {
    "chain": ("n_sites", "g1", "g2", "boundary"),
    "probe": ("k_over_pi", "alpha"),
    "protocol": ("kappa1", "kappa2", "kappa_r", "kappa_w", "eta_mem", "compensate_loss",
                 "storage_time", "g_inverse_ms"),
    "scenario": ("kind", "g1_init", "g2_init"),
    "grid": ("t_max", "n_samples", "window", "rel_threshold", "omega_min_factor"),
    "mc": ("shots", "seed", "points"),
    "output": ("dir",),
}

COMMAND_LINE = "<command line>"

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([A-Za-z_][\w.-]*)\s*[=:]")

Origin = Tuple[Optional[str], Optional[int]]


def _line_index(text: str) -> Dict[Tuple[str, str], int]:
    """1-based line of every section header and key assignment."""
    lines: Dict[Tuple[str, str], int] = {}
    section = None
    for number, line in enumerate(text.splitlines(), start=1):
        header = _SECTION_RE.match(line)
        if header:
            section = header.group(1).strip().lower()
            lines.setdefault((section, ""), number)
            continue
        key = _KEY_RE.match(line)
        if key and section is not None:
            lines[(section, key.group(1).lower())] = number
    return lines


def read_experiment_file(path: Path) -> Tuple[Dict[str, Dict[str, str]], Dict[Tuple[str, str], Origin]]:
    """Raw section -> key -> string values plus the origin of each value."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc.strerror}", path=str(path)) from exc

    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        message = getattr(exc, "message", str(exc)).splitlines()[0]
        raise ConfigError(message, path=str(path), line=line) from exc

    lines = _line_index(text)
    raw: Dict[str, Dict[str, str]] = {}
    origins: Dict[Tuple[str, str], Origin] = {}
    for section in parser.sections():
        name = section.strip().lower()
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", path=str(path),
                              line=lines.get((name, "")))
        for key, value in parser.items(section):
            if key not in KEYS[name]:
                raise ConfigError(f"unknown key {key!r} in [{name}]", path=str(path),
                                  line=lines.get((name, key)))
            raw.setdefault(name, {})[key] = value.strip()
            origins[(name, key)] = (str(path), lines.get((name, key)))
        raw.setdefault(name, {})
        origins.setdefault((name, ""), (str(path), lines.get((name, ""))))
    return raw, origins


def apply_overrides(
    raw: Dict[str, Dict[str, str]],
    origins: Dict[Tuple[str, str], Origin],
    overrides: Mapping[str, str],
) -> None:
    """Merge ``section.key -> value`` overrides in place."""
    for dotted, value in overrides.items():
        section, _, key = dotted.partition(".")
        section, key = section.strip().lower(), key.strip().lower()
        if section not in SECTIONS or key not in KEYS[section]:
            raise ConfigError(f"unknown config key {dotted!r}", path=COMMAND_LINE)
        raw.setdefault(section, {})[key] = str(value)
        origins[(section, key)] = (COMMAND_LINE, None)


def _fail(message: str, section: str, key: str, origins: Mapping[Tuple[str, str], Origin]) -> ConfigError:
    path, line = origins.get((section, key), origins.get((section, ""), (None, None)))
    return ConfigError(f"[{section}] {key}: {message}" if key else f"[{section}] {message}",
                       path=path, line=line)


def _build(model, section: str, values: Dict[str, object], keys: Mapping[str, str],
           origins: Mapping[Tuple[str, str], Origin]):
    """Validate one section; ``keys`` maps model fields back to file keys."""
    try:
        return model(**values)
    except ValidationError as exc:
        error = exc.errors()[0]
        field = str(error["loc"][0]) if error["loc"] else ""
        raise _fail(error["msg"], section, keys.get(field, field), origins) from exc


def _number(section: str, key: str, value: str, origins, cast=float):
    try:
        return cast(value)
    except ValueError:
        raise _fail(f"expected a number, got {value!r}", section, key, origins) from None


def build_experiment(
    raw: Mapping[str, Mapping[str, str]],
    origins: Mapping[Tuple[str, str], Origin],
) -> ExperimentConfig:
    chain_raw = dict(raw.get("chain", {}))
    if "n_sites" not in chain_raw:
        raise _fail("n_sites is required", "chain", "n_sites", origins)
    chain = _build(SpinChainSpec, "chain", chain_raw, {}, origins)

    probe_raw = raw.get("probe", {})
    probe_values: Dict[str, object] = {"n_sites": chain.n_sites}
    if "k_over_pi" in probe_raw:
        probe_values["k"] = math.pi * _number("probe", "k_over_pi", probe_raw["k_over_pi"], origins)
    if "alpha" in probe_raw:
        probe_values["alpha"] = probe_raw["alpha"]
    probe = _build(ProbeGeometry, "probe", probe_values, {"k": "k_over_pi"}, origins)

    protocol_values: Dict[str, object] = {
        "kappa1": settings.KAPPA1, "kappa2": settings.KAPPA2,
        "kappa_r": settings.KAPPA_R, "kappa_w": settings.KAPPA_W,
    }
    protocol_values.update(raw.get("protocol", {}))
    protocol = _build(ProtocolParams, "protocol", protocol_values, {}, origins)

    scenario = _build(Scenario, "scenario", dict(raw.get("scenario", {})), {}, origins)
    grid = _build(GridSpec, "grid", dict(raw.get("grid", {})), {}, origins)
    mc = _build(MonteCarloSpec, "mc", dict(raw["mc"]), {}, origins) if "mc" in raw else None

    values: Dict[str, object] = {
        "chain": chain, "probe": probe, "protocol": protocol,
        "scenario": scenario, "grid": grid, "mc": mc,
    }
    if raw.get("output", {}).get("dir"):
        values["outputs"] = Path(raw["output"]["dir"])
    try:
        return ExperimentConfig(**values)
    except ValidationError as exc:
        message = exc.errors()[0]["msg"]
        section = "scenario" if "quench" in message else "chain"
        raise _fail(message, section, "", origins) from exc


def load_experiment(
    path: Optional[Path] = None,
    overrides: Optional[Mapping[str, str]] = None,
) -> ExperimentConfig:
    """Read an experiment file (optional), apply ``section.key`` overrides, validate."""
    if path is not None:
        raw, origins = read_experiment_file(path)
    else:
        raw, origins = {}, {}
    apply_overrides(raw, origins, overrides or {})
    return build_experiment(raw, origins)
