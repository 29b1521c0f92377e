"""INI run configurations: one problem section plus an optional ``[output]`` section.

Example::

    [dirichlet]
    f = u + 0.5*u*sin(u)
    n = 3
    grid = 0, 0.07, 400

    [output]
    csv = fig2.csv
    svg = fig2.svg
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .expr import ExpressionError
from .model import Family, Nonlinearity, ProblemSpec, resolve_nonlinearity
from .ode import DEFAULT_ATOL, DEFAULT_RTOL


class ConfigError(ValueError):
    pass


_COMMON = {"f", "grid", "jump", "tol_rel", "tol_abs"}
SECTIONS = {
    "dirichlet": (Family.RADIAL_DIRICHLET, _COMMON | {"n", "supercritical", "eps", "tend"}),
    "neumann": (Family.RADIAL_NEUMANN, _COMMON | {"n", "eps", "tend"}),
    "plaplace": (Family.PLAPLACE_DIRICHLET, _COMMON | {"n", "p", "mode", "h", "tend"}),
    "nonauto": (Family.NONAUTONOMOUS_RADIAL, _COMMON | {"n", "lambda_init", "eps"}),
    "beam": (Family.CLAMPED_BEAM, _COMMON | {"lambda_init", "beta_init"}),
    "harmonic": (Family.HARMONIC_FORCED, _COMMON | {"e", "k", "strategy"}),
}
OUTPUT_KEYS = {"csv", "svg", "figure"}
# independent variable allowed in f for each family
_VARIABLES = {
    "dirichlet": ("u",),
    "neumann": ("u",),
    "plaplace": ("u",),
    "nonauto": ("u", "r"),
    "beam": ("u", "x"),
    "harmonic": ("u", "x"),
}


@dataclass
class RunConfig:
    section: str
    problem: ProblemSpec
    grid: tuple[float, float, int]
    tol: tuple[float, float] = (DEFAULT_RTOL, DEFAULT_ATOL)
    options: dict = field(default_factory=dict)
    seed: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    path: Path | None = None

    @property
    def family(self) -> Family:
        return self.problem.family


def _float(section, key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None


def _int(section, key, raw):
    try:
        value = float(raw)
    except ValueError:
        value = None
    if value is None or not value.is_integer():
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}")
    return int(value)


def _bool(section, key, raw):
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected true/false, got {raw!r}")


def _grid(section, raw):
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"[{section}] grid: expected 'start, step, count', got {raw!r}")
    start = _float(section, "grid", parts[0])
    step = _float(section, "grid", parts[1])
    count = _int(section, "grid", parts[2])
    if not step > 0 or count < 1:
        raise ConfigError(f"[{section}] grid: need step > 0 and count >= 1")
    return start, step, count


def _nonlinearity(section, key, raw, variables) -> Nonlinearity:
    try:
        return resolve_nonlinearity(raw, variables)
    except (ExpressionError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def parse_config(text: str, path: Path | None = None) -> RunConfig:
    """Validate ``text`` and build a :class:`RunConfig`; raises :class:`ConfigError`."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    names = cp.sections()
    unknown = [s for s in names if s not in SECTIONS and s != "output"]
    if unknown:
        raise ConfigError(f"unknown section(s) {unknown}; expected one of {sorted(SECTIONS)} and optional [output]")
    problems = [s for s in names if s in SECTIONS]
    if len(problems) != 1:
        raise ConfigError(f"exactly one problem section required, found {problems or 'none'}")
    name = problems[0]
    family, allowed = SECTIONS[name]
    sec = cp[name]
    extra = set(sec) - allowed
    if extra:
        raise ConfigError(f"[{name}] unknown key(s) {sorted(extra)}; allowed: {sorted(allowed)}")
    for required in ("f", "grid"):
        if required not in sec:
            raise ConfigError(f"[{name}] missing required key {required!r}")

    f = _nonlinearity(name, "f", sec["f"], _VARIABLES[name])
    kw = {}
    if "n" in sec:
        kw["n"] = _int(name, "n", sec["n"])
    if "p" in sec:
        kw["p"] = _float(name, "p", sec["p"])
    if "k" in sec:
        kw["k"] = _int(name, "k", sec["k"])
    if name == "harmonic" and "e" in sec:
        kw["forcing"] = _nonlinearity(name, "e", sec["e"], ("u", "x"))
    try:
        problem = ProblemSpec(family, f, **kw)
    except ValueError as exc:
        raise ConfigError(f"[{name}] {exc}") from None

    tol = (
        _float(name, "tol_rel", sec["tol_rel"]) if "tol_rel" in sec else DEFAULT_RTOL,
        _float(name, "tol_abs", sec["tol_abs"]) if "tol_abs" in sec else DEFAULT_ATOL,
    )
    if not (tol[0] > 0 and tol[1] > 0):
        raise ConfigError(f"[{name}] tolerances must be positive")

    options = {}
    for key in ("jump", "eps", "tend", "h"):
        if key in sec:
            value = _float(name, key, sec[key])
            if not value > 0:
                raise ConfigError(f"[{name}] {key} must be positive")
            options[key] = value
    if "supercritical" in sec:
        options["supercritical"] = _bool(name, "supercritical", sec["supercritical"])
    if "mode" in sec:
        mode = sec["mode"].strip()
        if mode not in ("naive", "regularized"):
            raise ConfigError(f"[{name}] mode must be naive or regularized, got {mode!r}")
        options["mode"] = mode
    if "strategy" in sec:
        strategy = sec["strategy"].strip()
        if strategy not in ("warm", "sin2x", "-sin2x"):
            raise ConfigError(f"[{name}] strategy must be warm, sin2x or -sin2x, got {strategy!r}")
        options["strategy"] = strategy
    seed = {}
    for key in ("lambda_init", "beta_init"):
        if key in sec:
            seed[key] = _float(name, key, sec[key])

    outputs = {}
    if cp.has_section("output"):
        bad = set(cp["output"]) - OUTPUT_KEYS
        if bad:
            raise ConfigError(f"[output] unknown key(s) {sorted(bad)}; allowed: {sorted(OUTPUT_KEYS)}")
        base = path.parent if path is not None else Path(".")
        outputs = {k: base / v.strip() for k, v in cp["output"].items()}
    return RunConfig(name, problem, _grid(name, sec["grid"]), tol, options, seed, outputs, path)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path)
