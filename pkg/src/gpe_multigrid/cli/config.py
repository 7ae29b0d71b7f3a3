"""
config.py

Loader for the flat run configuration:

    domain = l_shape
    subdivision = 2
    n_levels = 5
    zeta = 100
    potential = 1, 1

    [scf]
    damping = 0.5

    [bench]
    zeta_values = 1, 10, 100, 1000
    methods = tensor, baseline, direct-linear

    [adapt]
    theta_mark = 0.5
    max_dofs = 20000

Keys before the first section header belong to the solver. Values are validated by the
pydantic models in gpe_multigrid.models.

Author: Nathan Swanson
"""

from __future__ import annotations

import configparser
from pathlib import Path

from pydantic import ValidationError

from gpe_multigrid.errors import ConfigError
from gpe_multigrid.logger import gpe_logger
from gpe_multigrid.models import RunConfig

SOLVER_SECTION = "solver"

# config key -> path into the RunConfig dictionary
KEYS: dict[str, dict[str, tuple[str, ...]]] = {
    SOLVER_SECTION: {
        "domain": ("solver", "domain", "kind"),
        "subdivision": ("solver", "domain", "initial_subdivision"),
        "n_levels": ("solver", "n_levels"),
        "zeta": ("solver", "zeta"),
        "potential": ("solver", "potential", "gammas"),
        "c_sigma": ("solver", "c_sigma"),
        "method": ("solver", "method"),
        "h1_refinements": ("solver", "h1_refinements"),
        "reference_lambda": ("solver", "reference_lambda"),
        "seed": ("solver", "seed"),
        "dump_mesh": ("solver", "dump_mesh"),
    },
    "scf": {key: ("solver", "scf", key) for key in ("damping", "tol_lambda", "tol_u", "max_iters")},
    "bench": {key: ("bench", key) for key in ("zeta_values", "methods")},
    "adapt": {key: ("adapt", key) for key in ("theta_mark", "max_dofs")},
}
LIST_KEYS = {"potential", "zeta_values", "methods"}


def _split(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _put(tree: dict, path: tuple[str, ...], value) -> None:
    for part in path[:-1]:
        tree = tree.setdefault(part, {})
    tree[path[-1]] = value


def _parse(text: str, source: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(f"[{SOLVER_SECTION}]\n{text}", source=source)
    except configparser.DuplicateSectionError as e:
        msg = f"section [{e.section}] appears twice"
        raise ConfigError("duplicate-key", msg) from e
    except configparser.DuplicateOptionError as e:
        msg = f"key '{e.option}' appears twice in [{e.section}]"
        raise ConfigError("duplicate-key", msg) from e
    except configparser.Error as e:
        msg = f"cannot parse {source}: {e.message}"
        raise ConfigError("parse-error", msg) from e
    return parser


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Build a RunConfig from config text; unknown keys and invalid values raise ConfigError."""
    parser = _parse(text, source)
    tree: dict = {}
    for section in parser.sections():
        if section not in KEYS:
            msg = f"unknown section [{section}] in {source}"
            raise ConfigError("unknown-key", msg)
        for key, raw in parser.items(section):
            path = KEYS[section].get(key)
            if path is None:
                msg = f"unknown key '{key}' in [{section}] of {source}"
                raise ConfigError("unknown-key", msg)
            value = _split(raw) if key in LIST_KEYS else raw.strip()
            if key == "reference_lambda" and value.lower() in ("", "none"):
                value = None
            _put(tree, path, value)

    try:
        return RunConfig.model_validate(tree)
    except ValidationError as e:
        fields = ", ".join(".".join(str(p) for p in err["loc"]) for err in e.errors())
        msg = f"invalid value for {fields or 'the solver'} in {source}: {e.errors()[0]['msg']}"
        raise ConfigError("invalid-value", msg) from e


def load_config(path: Path | str) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        msg = f"config file {path} does not exist"
        gpe_logger.critical(msg)
        raise ConfigError("missing-file", msg)
    config = parse_config(path.read_text(encoding="utf-8"), source=str(path))
    gpe_logger.debug(f"loaded {path}: {config.solver.model_dump_json()}")
    return config
