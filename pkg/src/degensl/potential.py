"""Complex potentials sampled on the uniform grid over [0, pi]."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from .errors import ValidationError

DEFAULT_POINTS = 2049
MIN_POINTS = 9


@dataclass(frozen=True)
class PotentialGrid:
    """Samples ``q(x_i)`` at ``x_i = i*pi/(n_points-1)``.

    Inside each grid interval the solvers use the cubic through the four
    nearest samples (one-sided at the two end intervals); ``at`` is plain
    linear interpolation for resampling.
    """

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex).ravel()
        if vals.size < MIN_POINTS:
            raise ValidationError(f"need at least {MIN_POINTS} grid points, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("potential contains non-finite samples")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_points(self) -> int:
        return self.values.size

    @property
    def h(self) -> float:
        return np.pi / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, np.pi, self.n_points)

    @classmethod
    def from_function(cls, func: Callable, n_points: int = DEFAULT_POINTS) -> "PotentialGrid":
        x = np.linspace(0.0, np.pi, n_points)
        vals = np.broadcast_to(np.asarray(func(x), dtype=complex), x.shape)
        return cls(vals)

    @classmethod
    def zero(cls, n_points: int = DEFAULT_POINTS) -> "PotentialGrid":
        return cls(np.zeros(n_points, dtype=complex))

    def at(self, xs) -> np.ndarray:
        """Linear interpolant evaluated at arbitrary points of [0, pi]."""
        xs = np.asarray(xs, dtype=float)
        return np.interp(xs, self.x, self.values.real) + 1j * np.interp(xs, self.x, self.values.imag)

    def interval_values(self, tau: float) -> np.ndarray:
        """Cubic interpolant at x_i + tau*h for every interval i, 0 <= tau <= 1."""
        v = self.values
        inner = lagrange_weights(np.array([-1.0, 0.0, 1.0, 2.0]), tau)
        left = lagrange_weights(np.array([0.0, 1.0, 2.0, 3.0]), tau)
        right = lagrange_weights(np.array([0.0, 1.0, 2.0, 3.0]), 2.0 + tau)
        out = np.empty(v.size - 1, dtype=complex)
        out[1:-1] = inner[0] * v[:-3] + inner[1] * v[1:-2] + inner[2] * v[2:-1] + inner[3] * v[3:]
        out[0] = left @ v[:4]
        out[-1] = right @ v[-4:]
        return out

    def refined(self) -> "PotentialGrid":
        """Samples of the same (cubic) interpolant on the grid with half the spacing."""
        v = self.values
        out = np.empty(2 * v.size - 1, dtype=complex)
        out[::2] = v
        out[1::2] = self.interval_values(0.5)
        return PotentialGrid(out)

    def resampled(self, n_points: int) -> "PotentialGrid":
        return PotentialGrid(self.at(np.linspace(0.0, np.pi, n_points)))

    def l1_norm(self) -> float:
        return float(trapezoid(np.abs(self.values), dx=self.h))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def lagrange_weights(nodes: np.ndarray, t: float) -> np.ndarray:
    w = np.ones(nodes.size)
    for k, xk in enumerate(nodes):
        for j, xj in enumerate(nodes):
            if j != k:
                w[k] *= (t - xj) / (xk - xj)
    return w


def _asym_bump(x):
    return 2.0 * np.exp(-10.0 * (x - 1.0) ** 2)


BUILTINS: dict[str, Callable] = {
    "zero": lambda x: np.zeros_like(x),
    "linear": lambda x: x,
    "cos2x": lambda x: np.cos(2.0 * x),
    "asym-bump": _asym_bump,
    "complex-linear": lambda x: x + 1j * np.sin(x),
}


def builtin(name: str, n_points: int = DEFAULT_POINTS) -> PotentialGrid:
    try:
        func = BUILTINS[name]
    except KeyError:
        raise ValidationError(
            f"unknown built-in potential {name!r}; choose from {sorted(BUILTINS)}"
        ) from None
    return PotentialGrid.from_function(func, n_points)


def from_samples(samples, n_points: int = DEFAULT_POINTS) -> PotentialGrid:
    """Resample ``[[x, re, im], ...]`` rows onto the uniform grid (linear interpolation)."""
    try:
        arr = np.asarray(samples, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError("samples must be rows of [x, re, im] numbers") from None
    if arr.ndim != 2 or arr.shape[1] not in (2, 3) or arr.shape[0] < 2:
        raise ValidationError("samples must be at least two rows of [x, re, im]")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("samples contain non-finite numbers")
    xs = arr[:, 0]
    if np.any(np.diff(xs) <= 0):
        raise ValidationError("sample abscissae must be strictly increasing")
    if xs[0] > 1e-12 or xs[-1] < np.pi - 1e-12:
        raise ValidationError("samples must cover [0, pi]")
    im = arr[:, 2] if arr.shape[1] == 3 else np.zeros_like(xs)
    grid = np.linspace(0.0, np.pi, n_points)
    return PotentialGrid(np.interp(grid, xs, arr[:, 1]) + 1j * np.interp(grid, xs, im))


def potential_from_spec(spec, n_points: int = DEFAULT_POINTS, base_dir: Path | None = None) -> PotentialGrid:
    """Accept a built-in name, a path, or an inline ``{"builtin"|"samples": ...}`` mapping."""
    if isinstance(spec, str):
        if spec in BUILTINS:
            return builtin(spec, n_points)
        path = Path(spec)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_potential(path, n_points)
    if isinstance(spec, dict):
        if "builtin" in spec:
            return builtin(spec["builtin"], n_points)
        for key in ("samples", "expr-free samples"):
            if key in spec:
                return from_samples(spec[key], n_points)
        if "path" in spec:
            return potential_from_spec(str(spec["path"]), n_points, base_dir)
        raise ValidationError("potential: expected one of 'builtin', 'samples', 'path'")
    raise ValidationError(f"potential: unsupported specification {spec!r}")


def load_potential(path, n_points: int = DEFAULT_POINTS) -> PotentialGrid:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"potential file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"potential file {path} is not valid JSON: {exc}") from None
    if isinstance(doc, str):
        return builtin(doc, n_points)
    if not isinstance(doc, dict):
        raise ValidationError(f"potential file {path}: top level must be an object")
    if "path" in doc:
        raise ValidationError(f"potential file {path}: nested paths are not allowed")
    return potential_from_spec(doc, n_points)
