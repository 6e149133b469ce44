"""Experiment configuration files.

A config is a JSON object::

    {
      "spec_version": "1.0",
      "problem": "poisson1d",
      "discretization": {"N": 1024, "sweep": [4, 8, 12], "nb_policy": "grid"},
      "time": {"dt": 1e-3, "T": 1.0, "init_policy": "exact"},
      "output": {"directory": "out", "stride": 10, "timing": true},
      "mode": "exact",
      "fit": {"plateau_factor": 100.0, "min_ne": null}
    }

Only ``spec_version`` and ``problem`` are required; everything else falls back
to the registry defaults of the chosen problem.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

SPEC_VERSION = "1.0"
SUPPORTED_VERSIONS = ("1.0",)
TOP_LEVEL_KEYS = {"spec_version", "problem", "discretization", "time", "output", "mode", "fit", "params", "description"}
GRID_KEYS = {"N", "Nx", "Ny", "Nphi", "Ntheta"}
DISCRETIZATION_KEYS = GRID_KEYS | {"Ne", "sweep", "nb_policy", "half_length", "tensor_Ne", "flow_weight", "q"}
TIME_KEYS = {"dt", "T", "init_policy", "init_ratio", "scheme"}
OUTPUT_KEYS = {"directory", "stride", "timing", "checkpoint_stride"}
FIT_KEYS = {"plateau_factor", "min_ne"}
NB_POLICIES = ("grid",)
MODES = ("exact", "successive")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    """Validated experiment description with registry defaults filled in.

    Attributes:
        problem: registry key.
        discretization: grid sizes, ``Ne`` or ``sweep`` list and boundary-node policy.
        time: ``dt``, ``T`` and initialization settings (time-dependent problems only).
        output: ``directory``, diagnostic ``stride``, ``timing`` flag and ``checkpoint_stride``.
        mode: ``"exact"`` or ``"successive"`` error measurement.
        fit: rate-fit window options.
        params: problem-specific physical parameters.
    """

    problem: str
    discretization: dict = field(default_factory=dict)
    time: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    mode: str = "exact"
    fit: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    spec_version: str = SPEC_VERSION

    @property
    def sweep(self):
        return list(self.discretization.get("sweep") or [])

    def to_dict(self):
        return {"spec_version": self.spec_version, "problem": self.problem, "discretization": self.discretization,
                "time": self.time, "output": self.output, "mode": self.mode, "fit": self.fit, "params": self.params}


def _check_keys(section, allowed, name):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {sorted(unknown)}")


def _check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")


def _check_positive_number(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError(f"{name} must be a positive number, got {value!r}")


def validate_sweep(sweep):
    """Sweep lists must be non-empty, integral and strictly increasing."""
    if not isinstance(sweep, list) or not sweep:
        raise ConfigError("sweep list must be a non-empty list")
    for v in sweep:
        _check_positive_int(v, "sweep entry")
    if any(b <= a for a, b in zip(sweep, sweep[1:])):
        raise ConfigError(f"sweep list must be strictly increasing, got {sweep}")


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    out.update(given or {})
    return out


def validate_config(raw, paper_scale=False):
    """Check a parsed config against the schema and the registry.

    Args:
        raw: mapping parsed from JSON.
        paper_scale: use the registry's full-resolution defaults where they exist.

    Returns:
        An :class:`ExperimentConfig` with defaults merged in.

    Raises:
        ConfigError: on any schema or registry violation.
    """
    from .registry import REGISTRY

    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(raw, TOP_LEVEL_KEYS, "config")
    version = raw.get("spec_version")
    if version is None:
        raise ConfigError("missing spec_version")
    if str(version) not in SUPPORTED_VERSIONS:
        raise ConfigError(f"unsupported spec_version {version!r}; expected one of {SUPPORTED_VERSIONS}")
    key = raw.get("problem")
    if key not in REGISTRY:
        raise ConfigError(f"unknown problem {key!r}; run 'pespec list' for the registry")
    bench = REGISTRY[key]
    defaults = bench.paper_defaults if paper_scale and bench.paper_defaults else bench.defaults
    for name, allowed in (("discretization", DISCRETIZATION_KEYS), ("time", TIME_KEYS), ("output", OUTPUT_KEYS),
                          ("fit", FIT_KEYS)):
        section = raw.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"{name} must be an object")
        _check_keys(section, allowed, name)

    disc = _merge(defaults.get("discretization", {}), raw.get("discretization"))
    if "sweep" in (raw.get("discretization") or {}) and "Ne" in (raw.get("discretization") or {}):
        raise ConfigError("give either Ne or sweep, not both")
    if "Ne" in (raw.get("discretization") or {}):
        disc.pop("sweep", None)
    for g in GRID_KEYS & set(disc):
        _check_positive_int(disc[g], g)
    if bench.kind == "viscoelastic":
        ne = disc.get("Ne")
        if not (isinstance(ne, list) and len(ne) == 2):
            raise ConfigError("viscoelastic Ne must be a pair [Ne_x, Ne_y]")
        for v in ne:
            _check_positive_int(v, "Ne")
        tne = disc.get("tensor_Ne")
        if tne is not None:
            if not (isinstance(tne, list) and len(tne) == 2):
                raise ConfigError("tensor_Ne must be a pair [Ne_x, Ne_y] or null")
            for v in tne:
                _check_positive_int(v, "tensor_Ne")
    else:
        if "Ne" in disc:
            _check_positive_int(disc["Ne"], "Ne")
            disc["sweep"] = [disc.pop("Ne")]
        validate_sweep(disc.get("sweep"))
    policy = disc.setdefault("nb_policy", "grid")
    if policy not in NB_POLICIES:
        raise ConfigError(f"nb_policy must be one of {NB_POLICIES}, got {policy!r}")

    time_cfg = {}
    if bench.time_dependent:
        time_cfg = _merge(defaults.get("time", {}), raw.get("time"))
        for name in ("dt", "T"):
            _check_positive_number(time_cfg.get(name), name)
        n = round(time_cfg["T"] / time_cfg["dt"])
        if abs(n * time_cfg["dt"] - time_cfg["T"]) > 1e-12 * max(1.0, time_cfg["T"]):
            raise ConfigError(f"T={time_cfg['T']} is not a multiple of dt={time_cfg['dt']}")
        if "init_policy" in time_cfg and time_cfg["init_policy"] not in ("exact", "backward_euler", "forward_euler"):
            raise ConfigError(f"unknown init_policy {time_cfg['init_policy']!r}")
        if "init_ratio" in time_cfg:
            _check_positive_int(time_cfg["init_ratio"], "init_ratio")
    elif raw.get("time"):
        raise ConfigError(f"problem {key!r} is not time dependent; remove the time section")

    output = _merge(_merge({"directory": "pespec-output", "stride": 1, "timing": True, "checkpoint_stride": 0},
                           defaults.get("output")), raw.get("output"))
    _check_positive_int(output["stride"], "output.stride")
    if not isinstance(output["checkpoint_stride"], int) or output["checkpoint_stride"] < 0:
        raise ConfigError("output.checkpoint_stride must be a nonnegative integer")
    if not isinstance(output["timing"], bool):
        raise ConfigError("output.timing must be true or false")

    mode = raw.get("mode", defaults.get("mode", "exact"))
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "exact" and not bench.has_exact:
        raise ConfigError(f"problem {key!r} has no exact solution; use mode 'successive'")
    if bench.kind != "viscoelastic" and mode == "successive" and len(disc["sweep"]) < 2:
        raise ConfigError("successive refinement needs at least two sweep values")

    fit = _merge({"plateau_factor": 100.0, "min_ne": None}, _merge(defaults.get("fit", {}), raw.get("fit")))
    params = _merge(defaults.get("params", {}), raw.get("params"))
    return ExperimentConfig(key, disc, time_cfg, output, mode, fit, params, str(version))


def load_config(path, paper_scale=False):
    """Read and validate a UTF-8 JSON config file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return validate_config(raw, paper_scale)
