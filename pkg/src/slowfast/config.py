"""Run configuration: a YAML file with fixed, nested key blocks.

Grammar (every block optional except ``params``; unknown keys are errors)::

    command: analyze | sweep | simulate | entry-exit   # checked if present
    params:     {alpha, beta, gamma, delta, epsilon, d}
    analyze:    {locate_relaxation, tw_speed}
    sweep:      {delta_min, delta_max, n, continuation, y0, transient, max_time,
                 tol, locate_explosion}
    simulate:
      kind: ode | pde1d | pde2d
      ode:      {y0, t_end, tol, coords, samples, cycle, deltas}
      pde:      {nx, ny, dx, dt, t_end, snapshot_every, tiles, format,
                 ic: {kind, ...}, front: {species, level, x_max}}
    entry_exit: {v1}

Loading returns the fully resolved config for one command, with every
default filled in; :func:`dump_manifest` writes it back out so a run can be
replayed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import yaml

__all__ = ["ConfigError", "load_config", "dump_manifest", "COMMANDS"]

COMMANDS = ("analyze", "sweep", "simulate", "entry-exit")


class ConfigError(ValueError):
    """Schema violation; the message carries source, line and column."""


@dataclass(frozen=True)
class Opt:
    kind: str  # float, int, bool, str, pair, floats
    default: Any = None
    required: bool = False
    choices: tuple | None = None
    nullable: bool = True


IC_KEYS = {
    "step_1d": ("u_core", "v_core", "x_split", "v_split", "u_far", "v_far"),
    "elliptic_2d": ("u0", "v0", "x1", "y1", "x2", "y2", "d11", "d12", "d21", "d22"),
    "perturbed_2d": ("e1", "e2", "e3"),
}

SCHEMA: dict[str, Any] = {
    "command": Opt("str", None, choices=COMMANDS),
    "params": {
        "alpha": Opt("float", required=True, nullable=False),
        "beta": Opt("float", required=True, nullable=False),
        "gamma": Opt("float", required=True, nullable=False),
        "delta": Opt("float", required=True, nullable=False),
        "epsilon": Opt("float", 1.0, nullable=False),
        "d": Opt("float", 1.0, nullable=False),
    },
    "analyze": {
        "locate_relaxation": Opt("bool", True, nullable=False),
        "tw_speed": Opt("float", None),
    },
    "sweep": {
        "delta_min": Opt("float", required=True, nullable=False),
        "delta_max": Opt("float", required=True, nullable=False),
        "n": Opt("int", 41, nullable=False),
        "continuation": Opt("bool", True, nullable=False),
        "y0": Opt("pair", None),
        "transient": Opt("float", None),
        "max_time": Opt("float", None),
        "tol": Opt("float", 1e-9, nullable=False),
        "locate_explosion": Opt("bool", False, nullable=False),
    },
    "simulate": {
        "kind": Opt("str", "ode", choices=("ode", "pde1d", "pde2d"), nullable=False),
        "ode": {
            "y0": Opt("pair", (0.5, 1.0), nullable=False),
            "t_end": Opt("float", 2000.0, nullable=False),
            "tol": Opt("float", 1e-8, nullable=False),
            "coords": Opt("str", "log", choices=("log", "linear"), nullable=False),
            "samples": Opt("int", 2001, nullable=False),
            "cycle": Opt("bool", False, nullable=False),
            "deltas": Opt("floats", None),
        },
        "pde": {
            "nx": Opt("int", 600, nullable=False),
            "ny": Opt("int", None),
            "dx": Opt("float", 0.5, nullable=False),
            "dt": Opt("float", 0.005, nullable=False),
            "t_end": Opt("float", 100.0, nullable=False),
            "snapshot_every": Opt("float", 10.0, nullable=False),
            "tiles": Opt("int", 1, nullable=False),
            "format": Opt("str", "csv", choices=("csv", "pgm"), nullable=False),
            "ic": "IC",
            "front": {
                "species": Opt("str", "v", choices=("u", "v"), nullable=False),
                "level": Opt("float", None),
                "x_max": Opt("float", None),
            },
        },
    },
    "entry_exit": {
        "v1": Opt("float", None),
    },
}

# blocks that may be omitted or set to null as a whole
OPTIONAL_BLOCKS = ("front",)

COMMAND_BLOCK = {"analyze": "analyze", "sweep": "sweep", "simulate": "simulate", "entry-exit": "entry_exit"}


def _is_null(node) -> bool:
    return isinstance(node, yaml.ScalarNode) and node.tag == "tag:yaml.org,2002:null"


def _where(source: str, node) -> str:
    m = node.start_mark
    return f"{source}:{m.line + 1}:{m.column + 1}"


class _Reader:
    def __init__(self, source: str, loader: yaml.SafeLoader, root):
        self.source = source
        self.loader = loader
        self.root = root

    def fail(self, node, msg: str):
        raise ConfigError(f"{_where(self.source, node)}: {msg}")

    def scalar(self, node, opt: Opt, path: str):
        value = self.loader.construct_object(node, deep=True)
        if value is None:
            if not opt.nullable:
                self.fail(node, f"'{path}' may not be null")
            return None
        k = opt.kind
        if k == "float":
            return self._float(node, value, path)
        if k == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                self.fail(node, f"'{path}' must be an integer, got {value!r}")
            return int(value)
        if k == "bool":
            if not isinstance(value, bool):
                self.fail(node, f"'{path}' must be true or false, got {value!r}")
            return value
        if k == "str":
            if not isinstance(value, str):
                self.fail(node, f"'{path}' must be a string, got {value!r}")
            if opt.choices and value not in opt.choices:
                self.fail(node, f"'{path}' must be one of {', '.join(opt.choices)}; got {value!r}")
            return value
        if k in ("pair", "floats"):
            if not isinstance(value, list):
                self.fail(node, f"'{path}' must be a list of numbers")
            out = [self._float(node, x, path) for x in value]
            if k == "pair" and len(out) != 2:
                self.fail(node, f"'{path}' must have exactly two entries")
            if k == "floats" and not out:
                self.fail(node, f"'{path}' must not be empty")
            return out
        raise AssertionError(k)

    def _float(self, node, value, path):
        if isinstance(value, bool):
            self.fail(node, f"'{path}' must be a number, got {value!r}")
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                self.fail(node, f"'{path}' must be a number, got {value!r}")
        if not isinstance(value, (int, float)):
            self.fail(node, f"'{path}' must be a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            self.fail(node, f"'{path}' must be finite")
        return value

    def block(self, node, schema: dict, path: str, wanted: set[str] | None = None) -> dict:
        if node is not None and not isinstance(node, yaml.MappingNode):
            self.fail(node, f"'{path or 'config'}' must be a mapping")
        given = {}
        if node is not None:
            for k_node, v_node in node.value:
                key = self.loader.construct_object(k_node)
                if not isinstance(key, str) or key not in schema:
                    where = f"in '{path}'" if path else "at top level"
                    allowed = ", ".join(schema)
                    self.fail(k_node, f"unknown key {key!r} {where} (allowed: {allowed})")
                if key in given:
                    self.fail(k_node, f"duplicate key {key!r}")
                given[key] = v_node
        out = {}
        for key, sub in schema.items():
            if wanted is not None and key not in wanted:
                continue
            sub_path = f"{path}.{key}" if path else key
            v_node = given.get(key)
            if sub == "IC":
                out[key] = self.ic(v_node, sub_path, node)
            elif isinstance(sub, dict):
                if key in OPTIONAL_BLOCKS and (v_node is None or _is_null(v_node)):
                    out[key] = None
                else:
                    out[key] = self.block(v_node, sub, sub_path)
            else:
                if v_node is None:
                    if sub.required:
                        self.fail(node if node is not None else self.root, f"missing required key '{sub_path}'")
                    out[key] = list(sub.default) if isinstance(sub.default, tuple) else sub.default
                else:
                    out[key] = self.scalar(v_node, sub, sub_path)
        return out

    def ic(self, node, path: str, parent):
        if node is None:
            return {"kind": None}
        if not isinstance(node, yaml.MappingNode):
            self.fail(node, f"'{path}' must be a mapping")
        raw = {}
        kind = None
        for k_node, v_node in node.value:
            key = self.loader.construct_object(k_node)
            if key == "kind":
                kind = self.scalar(v_node, Opt("str", choices=tuple(IC_KEYS)), f"{path}.kind")
            else:
                raw[key] = (k_node, v_node)
        if kind is None:
            # a null kind (as written to manifests) selects the default for the grid
            if raw:
                self.fail(node, f"'{path}' needs a 'kind' ({', '.join(IC_KEYS)})")
            return {"kind": None}
        out = {"kind": kind}
        for key, (k_node, v_node) in raw.items():
            if key not in IC_KEYS[kind]:
                self.fail(k_node, f"unknown key {key!r} for initial condition {kind!r} "
                                  f"(allowed: {', '.join(IC_KEYS[kind])})")
            out[key] = self.scalar(v_node, Opt("float", nullable=False), f"{path}.{key}")
        return out


def load_config(text: str, command: str, source: str = "<config>") -> dict:
    """Parse and resolve a config for ``command``."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    loader = yaml.SafeLoader(text)
    try:
        try:
            root = loader.get_single_node()
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
            raise ConfigError(f"{where}: invalid YAML: {getattr(exc, 'problem', exc)}") from None
        if root is None:
            raise ConfigError(f"{source}: empty config")
        reader = _Reader(source, loader, root)
        block = COMMAND_BLOCK[command]
        # validate every block for unknown keys, but only resolve the ones this command uses
        reader.block(root, SCHEMA, "", wanted={"command", "params"})
        full = {}
        for k_node, v_node in root.value:
            full[loader.construct_object(k_node)] = (k_node, v_node)
        declared = None
        if "command" in full:
            declared = reader.scalar(full["command"][1], SCHEMA["command"], "command")
            if declared is not None and declared != command:
                reader.fail(full["command"][1], f"config is for '{declared}', not '{command}'")
        if "params" not in full:
            raise ConfigError(f"{_where(source, root)}: missing required block 'params'")
        for name, sub in SCHEMA.items():
            if isinstance(sub, dict) and name in full and name not in ("params", block):
                reader.block(full[name][1], sub, name)
        resolved = {"command": command}
        resolved["params"] = reader.block(full["params"][1], SCHEMA["params"], "params")
        if block not in full and _has_required(SCHEMA[block]):
            reader.fail(root, f"missing required block '{block}'")
        resolved[block] = reader.block(full[block][1] if block in full else None, SCHEMA[block], block)
        return resolved
    finally:
        loader.dispose()


def _has_required(schema: dict) -> bool:
    return any(isinstance(v, Opt) and v.required for v in schema.values())


def dump_manifest(cfg: dict) -> str:
    """YAML text of a resolved config; floats are written in shortest
    round-trip form, so loading the manifest reproduces the same run."""
    return yaml.safe_dump(cfg, sort_keys=False, default_flow_style=None)
