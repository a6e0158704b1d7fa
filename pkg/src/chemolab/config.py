"""Experiment configuration: INI-style blocks of key = value pairs.

Minimal example::

    [grid]
    nx = 64
    ny = 64
    lx = 1.0
    ly = 1.0

    [physics]
    tau = 0.0
    chi = 1.0

    [source]
    family = sublog 1.0 1.0 0.5

    [initial]
    kind = gaussian_bump
    width = 0.1
    mass = 1.0

    [run]
    t_end = 1.0

Sources may also be given structured (family = sublog plus a/b/gamma keys),
which is what lets sweeps target single source parameters.  The optional
[classify] block sets c_gn (a number, or "estimate" to use the certified
grid lower bound) and may pin u0_mass; [sweep] names one dotted parameter
(section.key), its values, and the process parallelism.

Validation happens at load time and reports the offending section/field.
The canonical text (sorted sections and keys) feeds a stable digest used to
tag result files.
"""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .fields import Grid
from .kinetics import SourceSpec, parse_source_spec
from .stepping import StepperOptions

_SECTIONS = ("grid", "physics", "source", "initial", "run", "classify", "sweep")

_DEFAULTS = {
    "grid": {"nx": "64", "ny": "64", "lx": "1.0", "ly": "1.0"},
    "physics": {"tau": "0.0", "chi": "1.0"},
    "source": {"family": "zero"},
    "initial": {"kind": "constant", "value": "1.0", "width": "0.1",
                "mass": "1.0", "seed": "0", "amplitude": "0.1",
                "base": "1.0", "v0": "equilibrium"},
    "run": {"t_end": "1.0", "cfl": "0.4", "dt_min": "1e-12", "dt_max": "inf",
            "blowup_linf_cap": "1e8", "record_every": "1",
            "snapshot_every": "0", "advection_scheme": "upwind",
            "elliptic_rtol": "1e-8"},
    "classify": {"c_gn": "1.0", "budget": "2000"},
}

_STRUCTURED_SOURCE_KEYS = ("a", "b", "theta", "gamma", "path")


def read_raw(path) -> dict:
    """Parse the file into {section: {key: string}} with case preserved."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh, source=str(path))
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from e
    raw = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError("unknown section", section=section)
        raw[section] = dict(cp.items(section))
    return raw


def canonical_text(raw: dict) -> str:
    lines = []
    for section in sorted(raw):
        lines.append(f"[{section}]")
        for key in sorted(raw[section]):
            lines.append(f"{key} = {raw[section][key]}")
    return "\n".join(lines) + "\n"


def config_hash(raw: dict) -> str:
    return hashlib.sha256(canonical_text(raw).encode()).hexdigest()[:16]


def apply_override(raw: dict, dotted: str, value) -> dict:
    """Return a copy of raw with section.key set to value (for sweeps)."""
    if "." not in dotted:
        raise ConfigError(f"sweep parameter must be section.key, got {dotted!r}")
    section, key = dotted.split(".", 1)
    out = {s: dict(kv) for s, kv in raw.items()}
    out.setdefault(section, {})[key] = str(value)
    return out


def _get(raw, section, key, conv, default=None):
    text = raw.get(section, {}).get(key)
    if text is None:
        text = _DEFAULTS.get(section, {}).get(key) if default is None else str(default)
    if text is None:
        raise ConfigError("missing required key", section=section, key=key)
    try:
        return conv(text)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad value {text!r}: {e}", section=section, key=key) from e


def _build_source(raw: dict, base_dir) -> SourceSpec:
    src = raw.get("source", _DEFAULTS["source"])
    family_line = src.get("family", "zero").strip()
    structured = [k for k in _STRUCTURED_SOURCE_KEYS if k in src]
    try:
        if structured or " " not in family_line:
            name = family_line
            if name == "zero" and not structured:
                return SourceSpec.zero()
            a = float(src.get("a", "0.0"))
            b = float(src.get("b", "1.0"))
            if name == "logistic":
                return SourceSpec.logistic(a, b, float(src.get("theta", "2.0")))
            if name == "sublog":
                return SourceSpec.sublog(a, b, float(src.get("gamma", "1.0")))
            if name == "subloglog":
                return SourceSpec.subloglog(a, b)
            if name == "tabulated":
                path = src.get("path")
                if path is None:
                    raise ValueError("tabulated source needs a path")
                if not os.path.isabs(path) and base_dir:
                    path = os.path.join(base_dir, path)
                return SourceSpec.tabulated_from_csv(path)
            raise ValueError(f"unknown source family {name!r}")
        return parse_source_spec(family_line, base_dir=base_dir)
    except ValueError as e:
        raise ConfigError(str(e), section="source", key="family") from e


@dataclass
class ExperimentConfig:
    grid: Grid
    tau: float
    chi: float
    source: SourceSpec
    initial_kind: str
    initial_params: dict
    run_params: dict
    c_gn: object              # float or the string "estimate"
    u0_mass_override: float | None
    cgn_budget: int
    sweep: dict | None
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def stepper_options(self) -> StepperOptions:
        rp = self.run_params
        return StepperOptions(
            tau=self.tau, chi=self.chi, t_end=rp["t_end"], source=self.source,
            cfl=rp["cfl"], dt_min=rp["dt_min"], dt_max=rp["dt_max"],
            blowup_linf_cap=rp["blowup_linf_cap"],
            advection_scheme=rp["advection_scheme"],
            elliptic_rtol=rp["elliptic_rtol"])


def build_config(raw: dict, base_dir=None) -> ExperimentConfig:
    try:
        grid = Grid(_get(raw, "grid", "nx", int), _get(raw, "grid", "ny", int),
                    _get(raw, "grid", "lx", float), _get(raw, "grid", "ly", float))
    except ValueError as e:
        raise ConfigError(str(e), section="grid") from e
    tau = _get(raw, "physics", "tau", float)
    chi = _get(raw, "physics", "chi", float)
    if tau < 0:
        raise ConfigError("tau must be nonnegative", section="physics", key="tau")
    if not chi > 0:
        raise ConfigError("chi must be positive", section="physics", key="chi")

    source = _build_source(raw, base_dir)

    kind = raw.get("initial", {}).get("kind", _DEFAULTS["initial"]["kind"])
    if kind not in ("constant", "gaussian_bump", "random_perturbation"):
        raise ConfigError(f"unknown initial kind {kind!r}",
                          section="initial", key="kind")
    init = {
        "value": _get(raw, "initial", "value", float),
        "width": _get(raw, "initial", "width", float),
        "mass": _get(raw, "initial", "mass", float),
        "seed": _get(raw, "initial", "seed", int),
        "amplitude": _get(raw, "initial", "amplitude", float),
        "base": _get(raw, "initial", "base", float),
        "v0": _get(raw, "initial", "v0", str),
    }
    center_text = raw.get("initial", {}).get("center")
    if center_text:
        parts = center_text.split()
        if len(parts) != 2:
            raise ConfigError("center needs two coordinates",
                              section="initial", key="center")
        init["center"] = (float(parts[0]), float(parts[1]))
    if init["v0"] not in ("equilibrium", "zero"):
        raise ConfigError(f"unknown v0 policy {init['v0']!r}",
                          section="initial", key="v0")

    rp = {
        "t_end": _get(raw, "run", "t_end", float),
        "cfl": _get(raw, "run", "cfl", float),
        "dt_min": _get(raw, "run", "dt_min", float),
        "dt_max": _get(raw, "run", "dt_max", float),
        "blowup_linf_cap": _get(raw, "run", "blowup_linf_cap", float),
        "record_every": _get(raw, "run", "record_every", int),
        "snapshot_every": _get(raw, "run", "snapshot_every", int),
        "advection_scheme": _get(raw, "run", "advection_scheme", str),
        "elliptic_rtol": _get(raw, "run", "elliptic_rtol", float),
    }
    if rp["t_end"] < 0:
        raise ConfigError("t_end must be nonnegative", section="run", key="t_end")
    if not 0 < rp["cfl"] < 1:
        raise ConfigError("cfl must lie in (0, 1)", section="run", key="cfl")
    if rp["record_every"] < 1:
        raise ConfigError("record_every must be >= 1",
                          section="run", key="record_every")
    if rp["advection_scheme"] not in ("upwind", "central"):
        raise ConfigError(f"unknown scheme {rp['advection_scheme']!r}",
                          section="run", key="advection_scheme")

    cgn_text = raw.get("classify", {}).get("c_gn", _DEFAULTS["classify"]["c_gn"])
    if cgn_text.strip() == "estimate":
        c_gn = "estimate"
    else:
        try:
            c_gn = float(cgn_text)
        except ValueError as e:
            raise ConfigError(f"bad value {cgn_text!r}", section="classify",
                              key="c_gn") from e
        if not c_gn > 0:
            raise ConfigError("c_gn must be positive", section="classify",
                              key="c_gn")
    u0_override = None
    if "u0_mass" in raw.get("classify", {}):
        u0_override = _get(raw, "classify", "u0_mass", float)
        if u0_override < 0:
            raise ConfigError("u0_mass must be nonnegative",
                              section="classify", key="u0_mass")
    budget = _get(raw, "classify", "budget", int)

    sweep = None
    if "sweep" in raw:
        sw = raw["sweep"]
        if "parameter" not in sw:
            raise ConfigError("missing required key", section="sweep",
                              key="parameter")
        try:
            values = [float(v) for v in sw.get("values", "").split()]
        except ValueError as e:
            raise ConfigError(f"bad values list: {e}", section="sweep",
                              key="values") from e
        parallel = int(sw.get("parallel", "1"))
        if parallel < 1:
            raise ConfigError("parallel must be >= 1", section="sweep",
                              key="parallel")
        sweep = {"parameter": sw["parameter"], "values": values,
                 "parallel": parallel}
        if "." not in sweep["parameter"]:
            raise ConfigError("parameter must be section.key",
                              section="sweep", key="parameter")

    return ExperimentConfig(grid=grid, tau=tau, chi=chi, source=source,
                            initial_kind=kind, initial_params=init,
                            run_params=rp, c_gn=c_gn,
                            u0_mass_override=u0_override, cgn_budget=budget,
                            sweep=sweep, raw=raw)


def load_config(path) -> ExperimentConfig:
    raw = read_raw(path)
    return build_config(raw, base_dir=os.path.dirname(os.path.abspath(path)))
