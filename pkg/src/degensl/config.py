"""Run configuration: one JSON document per run, validated field by field."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .inverse import COND_MAX, DEFAULT_M, TAIL_ANALYTIC, TAIL_TOL, TAIL_TRUNCATE
from .potential import DEFAULT_POINTS, PotentialGrid, potential_from_spec
from .spectral import DELTA, DIRICHLET, SearchRegion
from .target import TargetDeterminant, load_target

COMMANDS = ("forward", "det-scan", "eig", "inverse", "verify", "green", "projections", "diag")

DEFAULT_TOLERANCES = {
    "residual": 1e-3,
    "dirichlet": 1e-5,
    "tail": TAIL_TOL,
    "cond_max": COND_MAX,
    "probe": 1e-10,
    "bc": 1e-6,
    "projection": 1e-3,
    "roundtrip": 1e-12,
}

_REQUIRED = {
    "forward": ("potential", "mu"),
    "det-scan": ("potential", "region"),
    "eig": ("potential", "region"),
    "inverse": ("target",),
    "verify": ("target",),
    "green": ("potential", "mu"),
    "projections": ("potential", "region"),
    "diag": ("potential",),
}

_KNOWN = {
    "command", "potential", "grid_points", "theta", "det", "mu", "region", "scan_points",
    "refine_tol", "target", "truncation_M", "tail", "tolerances", "epsilon", "n_contour",
    "q_hat", "figures", "n_eigs", "asymptotic_mu", "probe",
}


def _fail(name: str, why: str):
    raise ValidationError(f"config field '{name}': {why}")


def _number(doc, name, default=None, positive=False, integer=False, minimum=None):
    value = doc.get(name, default)
    if value is None:
        _fail(name, "is required")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(name, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        _fail(name, "must be finite")
    if integer and int(value) != value:
        _fail(name, f"expected an integer, got {value!r}")
    if positive and value <= 0:
        _fail(name, f"must be positive, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(name, f"must be at least {minimum}, got {value!r}")
    return int(value) if integer else float(value)


def _complex(name, value) -> complex:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        re, im = value
    else:
        re, im = value, 0.0
    for part in (re, im):
        if isinstance(part, bool) or not isinstance(part, (int, float)) or not math.isfinite(part):
            _fail(name, f"expected a number or [re, im], got {value!r}")
    return complex(re, im)


def _interval(name, value):
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        _fail(name, f"expected [low, high], got {value!r}")
    lo, hi = (_complex(name, v).real for v in value)
    if lo > hi:
        _fail(name, f"low end exceeds high end in {value!r}")
    return lo, hi


@dataclass(frozen=True)
class RunConfig:
    command: str
    base_dir: Path
    potential: object = None
    grid_points: int = DEFAULT_POINTS
    theta: int = 0
    det: str = DELTA
    mus: tuple = ()
    region: tuple | None = None
    scan_points: tuple = (101, 1)
    refine_tol: float = 1e-10
    target: object = None
    truncation_M: int = DEFAULT_M
    tail: str = TAIL_ANALYTIC
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    epsilon: float = 0.15
    n_contour: int = 256
    q_hat: str = "q_hat.csv"
    figures: bool = True
    n_eigs: int | None = None
    asymptotic_mu: tuple = (20.0, 40.0)
    probe: bool = True
    explicit: frozenset = frozenset()

    @property
    def search_region(self) -> SearchRegion:
        (a, b), (c, d) = self.region
        return SearchRegion(a, b, c, d, self.refine_tol)

    def load_potential(self, n_points: int | None = None) -> PotentialGrid:
        return potential_from_spec(self.potential, n_points or self.grid_points, self.base_dir)

    def load_target(self) -> TargetDeterminant:
        if isinstance(self.target, dict):
            return TargetDeterminant.from_json(self.target)
        path = Path(self.target)
        return load_target(path if path.is_absolute() else self.base_dir / path)

    def q_hat_path(self, out_dir: Path) -> Path:
        """Explicit paths resolve against the config file; the default lives in the output directory."""
        path = Path(self.q_hat)
        if path.is_absolute():
            return path
        if "q_hat" in self.explicit:
            return self.base_dir / path
        return Path(out_dir) / path


def parse_config(doc, command: str, base_dir=".") -> RunConfig:
    """Validate a decoded JSON document for ``command``."""
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object")
    unknown = sorted(set(doc) - _KNOWN)
    if unknown:
        _fail(unknown[0], "unknown field")
    if "command" in doc and doc["command"] != command:
        _fail("command", f"config is for {doc['command']!r}, invoked as {command!r}")
    for name in _REQUIRED[command]:
        if name not in doc:
            _fail(name, f"is required for '{command}'")

    kw = {}
    kw["grid_points"] = _number(doc, "grid_points", DEFAULT_POINTS, integer=True, minimum=5)
    theta = doc.get("theta", 0)
    if theta not in (0, 1) or isinstance(theta, bool):
        _fail("theta", f"must be 0 or 1, got {theta!r}")
    kw["theta"] = int(theta)
    det = doc.get("det", DELTA)
    if det not in (DELTA, DIRICHLET):
        _fail("det", f"must be '{DELTA}' or '{DIRICHLET}', got {det!r}")
    kw["det"] = det

    if "potential" in doc:
        if not isinstance(doc["potential"], (str, dict)):
            _fail("potential", "expected a built-in name, a file path or an object")
        kw["potential"] = doc["potential"]
    if "mu" in doc:
        raw = doc["mu"]
        many = isinstance(raw, list) and raw and all(isinstance(v, list) for v in raw)
        kw["mus"] = tuple(_complex("mu", v) for v in raw) if many else (_complex("mu", raw),)
        if command == "green" and len(kw["mus"]) != 1:
            _fail("mu", "green takes a single spectral parameter")
    if "region" in doc:
        reg = doc["region"]
        if not isinstance(reg, dict) or set(reg) != {"re", "im"}:
            _fail("region", "expected {\"re\": [a, b], \"im\": [c, d]}")
        kw["region"] = (_interval("region.re", reg["re"]), _interval("region.im", reg["im"]))
        if command in ("eig", "projections"):
            (a, b), (c, d) = kw["region"]
            if not (a < b and c < d):
                _fail("region", "needs positive width and height for a zero search")
    if "scan_points" in doc:
        sp = doc["scan_points"]
        sp = [sp, 1] if isinstance(sp, int) and not isinstance(sp, bool) else sp
        if not (isinstance(sp, list) and len(sp) == 2):
            _fail("scan_points", "expected an integer or [n_re, n_im]")
        kw["scan_points"] = tuple(_number({"scan_points": v}, "scan_points", integer=True, minimum=1) for v in sp)
    kw["refine_tol"] = _number(doc, "refine_tol", 1e-10, positive=True)
    if "target" in doc:
        if not isinstance(doc["target"], (str, dict)):
            _fail("target", "expected a file path or an inline target object")
        kw["target"] = doc["target"]
    kw["truncation_M"] = _number(doc, "truncation_M", DEFAULT_M, integer=True, minimum=1)
    tail = doc.get("tail", TAIL_ANALYTIC)
    if tail not in (TAIL_ANALYTIC, TAIL_TRUNCATE):
        _fail("tail", f"must be '{TAIL_ANALYTIC}' or '{TAIL_TRUNCATE}', got {tail!r}")
    kw["tail"] = tail

    tols = dict(DEFAULT_TOLERANCES)
    given = doc.get("tolerances", {})
    if not isinstance(given, dict):
        _fail("tolerances", "expected an object")
    for name, value in given.items():
        if name not in DEFAULT_TOLERANCES:
            _fail(f"tolerances.{name}", "unknown tolerance")
        tols[name] = _number({f"tolerances.{name}": value}, f"tolerances.{name}", positive=True)
    kw["tolerances"] = tols

    kw["epsilon"] = _number(doc, "epsilon", 0.15, positive=True)
    if kw["epsilon"] > math.pi / 2:
        _fail("epsilon", "must not exceed pi/2")
    kw["n_contour"] = _number(doc, "n_contour", 256, integer=True, minimum=8)
    if "q_hat" in doc:
        if not isinstance(doc["q_hat"], str):
            _fail("q_hat", "expected a file path")
        kw["q_hat"] = doc["q_hat"]
    for flag in ("figures", "probe"):
        if flag in doc:
            if not isinstance(doc[flag], bool):
                _fail(flag, "expected true or false")
            kw[flag] = doc[flag]
    if "n_eigs" in doc:
        kw["n_eigs"] = _number(doc, "n_eigs", integer=True, minimum=1)
    if "asymptotic_mu" in doc:
        am = doc["asymptotic_mu"]
        if not isinstance(am, list) or not am:
            _fail("asymptotic_mu", "expected a non-empty list of numbers")
        kw["asymptotic_mu"] = tuple(_number({"asymptotic_mu": v}, "asymptotic_mu", positive=True) for v in am)

    return RunConfig(command=command, base_dir=Path(base_dir), explicit=frozenset(doc), **kw)


def load_config(path, command: str) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path} is not valid JSON: {exc}") from None
    return parse_config(doc, command, path.parent)
