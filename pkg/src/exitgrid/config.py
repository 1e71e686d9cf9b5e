"""Line-oriented run configuration: ``[section]`` headers and ``key = value``
pairs, comments starting with ``#``.

Unknown sections or keys are rejected.  A parsed configuration normalizes to
a canonical mapping that re-emits to text and re-parses identically, which
keeps runs reproducible from the config file alone.
"""

from __future__ import annotations

from dataclasses import dataclass

from .catalog import build_instance
from .grids import Grid
from .problems import ControlProblem, TargetSet
from .solvers import SolverParams

__all__ = ["ConfigError", "RunConfig", "parse_config", "parse_config_file", "emit_config"]


class ConfigError(ValueError):
    pass


def _parse_float(s):
    return float(s)


def _parse_int(s):
    return int(s)


def _parse_str(s):
    return str(s).strip()


def _parse_bool(s):
    v = s.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_vector(s):
    return tuple(float(v) for v in s.split())


def _parse_intvector(s):
    return tuple(int(v) for v in s.split())


_SCHEMA = {
    "instance": {
        "name": _parse_str,
        "p": _parse_float,
        "k": _parse_float,
        "target_choice": _parse_str,
        "intensity": _parse_str,
        "target": _parse_str,
        "target_tolerance": _parse_float,
        "ball_samples": _parse_int,
        "control_samples": _parse_int,
    },
    "grid": {
        "lower": _parse_vector,
        "upper": _parse_vector,
        "nodes": _parse_intvector,
    },
    "solver": {
        "scheme": _parse_str,
        "tolerance": _parse_float,
        "max_sweeps": _parse_int,
        "boundary": _parse_str,
        "jacobi": _parse_bool,
    },
    "simulate": {
        "x0": _parse_vector,
        "signal": _parse_str,
        "dt": _parse_float,
        "t_max": _parse_float,
        "stop_at_target": _parse_bool,
    },
    "verify": {
        "candidate": _parse_str,
        "lower_bound_threshold": _parse_float,
        "residual_threshold": _parse_float,
        "target_margin": _parse_float,
        "target_value_tol": _parse_float,
    },
    "hypotheses": {
        "check": _parse_str,
        "n_states": _parse_int,
        "n_signals": _parse_int,
        "horizon": _parse_float,
        "horizons": _parse_vector,
        "seed": _parse_int,
        "n_steps": _parse_int,
    },
}


def parse_config(text: str) -> "RunConfig":
    sections: dict[str, dict] = {}
    current_name: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current_name = line[1:-1].strip()
            if current_name not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{current_name}]")
            sections.setdefault(current_name, {})
            continue
        if current_name is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        schema = _SCHEMA[current_name]
        if key in sections[current_name]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key not in schema:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{current_name}]")
        try:
            sections[current_name][key] = schema[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    return RunConfig(sections)


def parse_config_file(path: str) -> "RunConfig":
    with open(path) as fh:
        return parse_config(fh.read())


def _emit_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return " ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_config(sections: dict) -> str:
    out = []
    for name in _SCHEMA:
        if name not in sections:
            continue
        out.append(f"[{name}]")
        for key in _SCHEMA[name]:
            if key in sections[name]:
                out.append(f"{key} = {_emit_value(sections[name][key])}")
        out.append("")
    return "\n".join(out)


def _parse_target_spec(spec: str, tolerance: float = 0.0) -> TargetSet:
    kind, _, rest = spec.partition(":")
    kind = kind.strip().lower()
    rest = rest.strip()
    if kind == "point":
        return TargetSet.from_points([_parse_vector(rest)], tolerance)
    if kind == "points":
        return TargetSet.from_points([_parse_vector(p) for p in rest.split(";")], tolerance)
    if kind == "halfline":
        anchor, _, direction = rest.partition("/")
        return TargetSet.half_line(_parse_vector(anchor), _parse_vector(direction), tolerance)
    if kind == "complement_ball":
        center, _, radius = rest.partition("/")
        return TargetSet.complement_ball(_parse_vector(center), float(radius), tolerance)
    raise ConfigError(f"unknown target spec {spec!r}")


@dataclass
class RunConfig:
    sections: dict

    def normalized(self) -> dict:
        return {name: dict(sec) for name, sec in self.sections.items() if sec}

    def require(self, section: str) -> dict:
        if section not in self.sections:
            raise ConfigError(f"missing [{section}] section")
        return self.sections[section]

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    # -- builders ---------------------------------------------------------

    def build_problem(self) -> ControlProblem:
        sec = dict(self.require("instance"))
        name = sec.pop("name", None)
        if name is None:
            raise ConfigError("[instance] needs a name")
        tol = sec.pop("target_tolerance", 0.0)
        target_spec = sec.pop("target", None)
        kwargs = {}
        if name == "eikonal":
            if "p" not in sec:
                raise ConfigError("eikonal instance needs p")
            kwargs["p"] = sec.pop("p")
            if "ball_samples" in sec:
                kwargs["ball_samples"] = sec.pop("ball_samples")
        elif name == "fuller":
            kwargs["k"] = sec.pop("k", 0.0)
            if "control_samples" in sec:
                kwargs["control_samples"] = sec.pop("control_samples")
        elif name == "example1":
            kwargs["target_choice"] = sec.pop("target_choice", "T1")
            if "control_samples" in sec:
                kwargs["control_samples"] = sec.pop("control_samples")
        elif name == "sfs":
            kwargs["intensity"] = sec.pop("intensity", "pound0")
            if "ball_samples" in sec:
                kwargs["ball_samples"] = sec.pop("ball_samples")
        elif name != "scalar_halfline":
            raise ConfigError(f"unknown instance name {name!r}")
        if sec:
            raise ConfigError(f"keys {sorted(sec)} do not apply to instance {name!r}")
        if target_spec is not None:
            if name not in ("eikonal", "sfs"):
                raise ConfigError(f"instance {name!r} does not accept a target override")
            kwargs["target"] = _parse_target_spec(target_spec, tol)
        return build_instance(name, **kwargs)

    def build_grid(self) -> Grid:
        sec = self.require("grid")
        for key in ("lower", "upper", "nodes"):
            if key not in sec:
                raise ConfigError(f"[grid] needs {key}")
        return Grid.regular(sec["lower"], sec["upper"], sec["nodes"])

    def build_solver_params(self) -> SolverParams:
        sec = self.sections.get("solver", {})
        max_sweeps = sec.get("max_sweeps", 0) or None
        return SolverParams(
            tolerance=sec.get("tolerance", 1e-8),
            max_sweeps=max_sweeps,
            boundary_mode=sec.get("boundary", "outflow_large"),
            jacobi=sec.get("jacobi", False),
        )

    def scheme(self) -> str:
        s = self.get("solver", "scheme", "semi_lagrangian")
        if s not in ("semi_lagrangian", "fast_marching"):
            raise ConfigError(f"unknown scheme {s!r}")
        return s

    def build_signal(self, control_dim: int):
        from .dynamics import constant_signal, feedback_signal, piecewise_signal
        from .dynamics import fuller_feedback, fuller_switch_constant

        spec = self.get("simulate", "signal")
        if spec is None:
            raise ConfigError("[simulate] needs a signal")
        kind, _, rest = spec.partition(":")
        kind = kind.strip().lower()
        rest = rest.strip()
        if kind == "constant":
            vec = _parse_vector(rest)
            if len(vec) != control_dim:
                raise ConfigError(f"signal control dim {len(vec)} != expected {control_dim}")
            return constant_signal(vec)
        if kind == "piecewise":
            breaks, _, vals = rest.partition("/")
            values = [_parse_vector(v) for v in vals.split(";")]
            return piecewise_signal(_parse_vector(breaks), values)
        if kind == "feedback":
            parts = rest.split()
            if not parts or parts[0] != "fuller":
                raise ConfigError(f"unknown feedback {rest!r}")
            c = float(parts[1]) if len(parts) > 1 else fuller_switch_constant()
            return feedback_signal(lambda x: [fuller_feedback(x, c)], label=f"fuller C={c:.6g}")
        raise ConfigError(f"unknown signal spec {spec!r}")
