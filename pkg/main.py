"""
Command-line entry point.

    python main.py run configs/ring12.ini
    python main.py spectrum-only --sites 8 --t-max 100
    python main.py mc-validate configs/two_site.ini --shots 100000 --seed 7
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import ValidationError

from config import settings
from engine.errors import CapacityError, ConfigError
from engine.runner import mc_validate, run, spectrum_only
from models import load_experiment

logger = logging.getLogger("qmap")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CAPACITY = 3

COMMANDS = {
    "run": run,
    "spectrum-only": spectrum_only,
    "mc-validate": mc_validate,
}

# flag destination -> config key
FLAG_KEYS = {
    "sites": "chain.n_sites",
    "g1": "chain.g1",
    "g2": "chain.g2",
    "boundary": "chain.boundary",
    "k_over_pi": "probe.k_over_pi",
    "alpha": "probe.alpha",
    "kappa1": "protocol.kappa1",
    "kappa2": "protocol.kappa2",
    "kappaR": "protocol.kappa_r",
    "kappaW": "protocol.kappa_w",
    "eta_mem": "protocol.eta_mem",
    "t_max": "grid.t_max",
    "samples": "grid.n_samples",
    "shots": "mc.shots",
    "seed": "mc.seed",
    "out": "output.dir",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmap",
        description=f"{settings.APP_NAME} {settings.VERSION}: two-time correlators of a "
                    "spin chain probed through a light-matter quantum memory",
    )
    parser.add_argument("command", choices=sorted(COMMANDS), help="Pipeline to execute")
    parser.add_argument("config", nargs="?", type=Path, help="Experiment file (INI sections)")

    chain = parser.add_argument_group("chain")
    chain.add_argument("--sites", help="Number of sites (even)")
    chain.add_argument("--g1", help="Coupling on bonds (2n, 2n+1)")
    chain.add_argument("--g2", help="Coupling on bonds (2n+1, 2n+2)")
    chain.add_argument("--boundary", choices=["periodic", "open"])

    probe = parser.add_argument_group("probe")
    probe.add_argument("--k-over-pi", dest="k_over_pi", help="Probe wavenumber in units of pi/a")
    probe.add_argument("--alpha", help="Standing-wave phase shift (rad)")

    protocol = parser.add_argument_group("protocol")
    protocol.add_argument("--kappa1")
    protocol.add_argument("--kappa2")
    protocol.add_argument("--kappaR", dest="kappaR")
    protocol.add_argument("--kappaW", dest="kappaW")
    protocol.add_argument("--eta-mem", dest="eta_mem", help="Memory transmission in (0, 1]")

    grid = parser.add_argument_group("grid and Monte Carlo")
    grid.add_argument("--t-max", dest="t_max", help="Largest time, units of 1/g")
    grid.add_argument("--samples", help="Number of samples on [0, t_max]")
    grid.add_argument("--shots", help="Monte Carlo shots (enables error bars on run)")
    grid.add_argument("--seed", help="Monte Carlo seed")

    parser.add_argument("--out", help=f"Output directory (default {settings.OUTPUT_DIR}, "
                                      "env QMAP_OUTPUT_DIR)")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="Override any config key")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, str]:
    """Generic --set values first, dedicated flags on top."""
    overrides: Dict[str, str] = {}
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}",
                              path="<command line>")
        overrides[key.strip()] = value.strip()
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = str(value)
    return overrides


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    try:
        config = load_experiment(args.config, collect_overrides(args))
        manifest = COMMANDS[args.command](config, command=args.command)
    except ConfigError as exc:
        logger.error("Invalid configuration: %s", exc.render())
        return EXIT_INVALID
    except ValidationError as exc:
        logger.error("Invalid configuration: %s", exc)
        return EXIT_INVALID
    except CapacityError as exc:
        logger.error("%s", exc)
        return EXIT_CAPACITY
    except ValueError as exc:
        logger.error("Invalid input: %s", exc)
        return EXIT_INVALID

    logger.info("%s finished; outputs in %s: %s", args.command, config.outputs,
                ", ".join(manifest.outputs))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
