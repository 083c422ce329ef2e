"""INI run configuration: schema, validation and layered overrides.

Precedence, lowest first: built-in defaults, the config file, environment
variables, command-line flags.  Environment overrides use
``FRACSPDE__<SECTION>__<KEY>``; the shortcuts ``FRACSPDE_SEED``,
``FRACSPDE_REPLICATES``, ``FRACSPDE_THREADS`` and ``FRACSPDE_OUT`` map to the
``[run]`` section.
"""
from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass, field

ENV_PREFIX = "FRACSPDE"


class ConfigError(ValueError):
    """Invalid configuration, with the offending section/key and file line if known."""

    def __init__(self, message: str, section: str | None = None, key: str | None = None,
                 line: int | None = None, source: str | None = None):
        self.section, self.key, self.line, self.source = section, key, line, source
        where = ""
        if section:
            where = f"[{section}]" + (f" {key}" if key else "")
        if line is not None:
            where = f"{source or '<config>'}:{line}: {where}"
        super().__init__(f"{where}: {message}" if where else message)

    def to_dict(self) -> dict:
        return {"error": "ConfigError", "message": str(self), "section": self.section,
                "key": self.key, "line": self.line}


def _floats(text: str) -> list:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    return [float(p) for p in parts]


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not (0 <= v < 2**64):
        raise ValueError("must be an unsigned 64-bit integer")
    return v


def _choice(*opts):
    def conv(text):
        t = text.strip()
        if t not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}")
        return t
    return conv


def _opt_float(text: str):
    t = text.strip().lower()
    return None if t in ("", "none", "auto") else float(text)


# section -> key -> (converter, default as text)
SCHEMA = {
    "run": {
        "seed": (_u64, "20240601"),
        "replicates": (int, "200"),
        "threads": (int, "1"),
        "out": (str, "out"),
    },
    "kernel": {
        "alpha": (float, "0.75"),
        "dim": (int, "1"),
        "fourier_cutoff": (_opt_float, "auto"),
        "quad_points": (int, "64"),
    },
    "grid": {
        "t_max": (float, "1.0"),
        "nt": (int, "10000"),
        "domain_len": (float, "4.0"),
        "nx": (int, "256"),
    },
    "noise": {"kind": (_choice("single_bm", "spacetime_white"), "spacetime_white")},
    "forcing": {
        "family": (_choice("constant", "holder_vanishing", "lp_decay"), "constant"),
        "params": (_floats, ""),
    },
    "plan": {
        "p": (float, "8"),
        "beta": (_opt_float, "auto"),
        "delta_gap": (_opt_float, "auto"),
        "alphas": (_floats, "0.55, 0.75, 1.0"),
        "ps": (_floats, "4, 8, 16, 32"),
    },
    "tolerances": {
        "mass": (float, "1e-6"),
        "mass_2d": (float, "1e-4"),
        "self_similarity": (float, "1e-8"),
        "ratio_spread": (float, "50"),
        "fit": (float, "0.1"),
        "slope_margin": (float, "0.5"),
    },
    "kernel_verify": {
        "t_values": (_floats, "0.1, 1, 10"),
        "sharp_bound": (_bool, "true"),
        "derivative": (_bool, "true"),
        "dims": (_floats, "1, 2"),
        "grid_points": (int, "100"),
    },
    "simulate": {
        "store_every": (int, "20"),
        "store_start": (int, "6000"),
        "probe_x": (_floats, "0.0"),
        "write_fields": (_bool, "false"),
    },
    "estimate": {
        "pair_classes": (str, "space, time"),
        "space_lags": (_floats, "4, 8, 16, 32"),
        "time_lags": (_floats, "1, 4, 16, 64"),
        "moment": (float, "2"),
        "min_replicates": (int, "50"),
    },
    "seminorm": {
        "field": (_choice("abs_power", "linear_x", "linear_t", "constant", "simulated"), "abs_power"),
        "gamma": (float, "0.5"),
        "p": (float, "2"),
        "theta": (_opt_float, "auto"),
        "n": (int, "64"),
        "refinements": (int, "3"),
    },
    "chaining": {
        "alpha_exp": (float, "0.4"),
        "level": (int, "6"),
        "paths": (int, "100"),
        "x_start": (float, "0.0"),
    },
    "report": {"input": (str, "")},
}

SUBCOMMANDS = ("kernel-verify", "simulate", "estimate", "seminorm", "plan", "chaining", "report")


@dataclass
class RunConfig:
    subcommand: str
    values: dict  # section -> key -> converted value
    source: str | None = None
    raw: dict = field(default_factory=dict)

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    @property
    def replicates(self) -> int:
        return self.values["run"]["replicates"]

    @property
    def threads(self) -> int:
        return self.values["run"]["threads"]

    @property
    def out(self) -> str:
        return self.values["run"]["out"]

    def hashable(self) -> dict:
        """Everything that influences results (output dir and threads excluded)."""
        vals = {s: dict(v) for s, v in self.raw.items()}
        vals["run"] = {k: v for k, v in vals["run"].items() if k not in ("out", "threads")}
        return {"subcommand": self.subcommand, "config": vals}


def _line_numbers(text: str) -> dict:
    """(section, key) -> 1-based line number in the INI text."""
    out, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            out[(section, None)] = i
            continue
        m = re.match(r"^([A-Za-z0-9_\-]+)\s*[=:]", s)
        if m and section is not None:
            out[(section, m.group(1).strip().lower())] = i
    return out


def load_config(subcommand: str, path=None, env=None, overrides=None) -> RunConfig:
    """Build a validated RunConfig; raises ConfigError on any problem."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    env = os.environ if env is None else env
    raw = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    origin = {}
    lines = {}
    if path is not None:
        try:
            text = open(path).read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            raise ConfigError(f"parse error: {exc.message if hasattr(exc, 'message') else exc}",
                              line=line, source=str(path)) from exc
        lines = _line_numbers(text)
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError("unknown section", section, line=lines.get((section, None)), source=str(path))
            for key, val in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError("unknown key", section, key, lines.get((section, key)), str(path))
                raw[section][key] = val
                origin[(section, key)] = ("file", lines.get((section, key)))
    shortcuts = {"SEED": "seed", "REPLICATES": "replicates", "THREADS": "threads", "OUT": "out"}
    for name, val in sorted(env.items()):
        if not name.startswith(ENV_PREFIX + "_"):
            continue
        rest = name[len(ENV_PREFIX) + 1:]
        if rest.startswith("_"):
            parts = rest[1:].split("__")
            if len(parts) != 2:
                raise ConfigError(f"malformed environment override {name}")
            section, key = parts[0].lower(), parts[1].lower()
        elif rest in shortcuts:
            section, key = "run", shortcuts[rest]
        else:
            continue
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"environment override {name} names an unknown field", section, key)
        raw[section][key] = val
        origin[(section, key)] = ("env", None)
    for (section, key), val in (overrides or {}).items():
        if val is None:
            continue
        raw[section][key] = str(val)
        origin[(section, key)] = ("flag", None)

    values = {}
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (conv, _) in keys.items():
            text = raw[section][key]
            try:
                values[section][key] = conv(text)
            except (ValueError, TypeError) as exc:
                kind, line = origin.get((section, key), ("default", None))
                raise ConfigError(f"invalid value {text!r} ({kind}): {exc}", section, key, line,
                                  str(path) if line else None) from exc
    _validate(values, origin, path)
    return RunConfig(subcommand, values, str(path) if path else None, raw)


def _validate(v, origin, path):
    def fail(section, key, msg):
        _, line = origin.get((section, key), (None, None))
        raise ConfigError(msg, section, key, line, str(path) if line else None)

    if v["run"]["replicates"] < 0:
        fail("run", "replicates", "must be non-negative")
    if v["run"]["threads"] < 1:
        fail("run", "threads", "must be at least 1")
    a = v["kernel"]["alpha"]
    if not (0 < a <= 1):
        fail("kernel", "alpha", "must lie in (0, 1]")
    if v["kernel"]["dim"] not in (1, 2):
        fail("kernel", "dim", "only 1 and 2 are supported")
    nx = v["grid"]["nx"]
    if nx < 4 or nx & (nx - 1):
        fail("grid", "nx", "must be a power of two >= 4")
    if v["grid"]["nt"] < 2:
        fail("grid", "nt", "must be at least 2")
    for key in ("t_max", "domain_len"):
        if not v["grid"][key] > 0:
            fail("grid", key, "must be positive")
    if v["grid"]["nt"] % v["simulate"]["store_every"]:
        fail("simulate", "store_every", "must divide grid.nt")
    for key, val in v["tolerances"].items():
        if not val >= 0:
            fail("tolerances", key, "must be non-negative")
    if v["chaining"]["level"] < 1:
        fail("chaining", "level", "must be at least 1")
    if not (0 < v["chaining"]["alpha_exp"] <= 1):
        fail("chaining", "alpha_exp", "must lie in (0, 1]")
    classes = [c.strip() for c in v["estimate"]["pair_classes"].split(",") if c.strip()]
    if not classes or any(c not in ("space", "time", "mixed") for c in classes):
        fail("estimate", "pair_classes", "must list space, time and/or mixed")
    v["estimate"]["pair_classes"] = classes
