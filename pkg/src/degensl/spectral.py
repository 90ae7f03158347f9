"""Characteristic determinants and complex zero localization.

Zeros are counted with the argument principle on rectangles in the mu-plane:
the change of arg det along the boundary is accumulated sample by sample,
with segments subdivided until no single step turns the phase by more than
``PHASE_STEP``.  Boxes are bisected until each holds at most one zero (or
becomes tiny), then the zero is polished with Newton's method.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import ode
from .errors import (
    BoundaryTooCloseError,
    DegenerateDeterminantError,
    NoConvergenceError,
    ValidationError,
)
from .potential import PotentialGrid

DELTA = "delta"
DIRICHLET = "dirichlet"
PHASE_STEP = math.pi / 4
_SPLIT_FRACTIONS = (0.5137, 0.4571, 0.5629, 0.4083)


@dataclass(frozen=True)
class BoundaryTheta:
    theta: int

    def __post_init__(self):
        if self.theta not in (0, 1):
            raise ValidationError(f"theta must be 0 or 1, got {self.theta!r}")

    @property
    def sign(self) -> int:
        return -1 if self.theta else 1


def as_theta(theta) -> BoundaryTheta:
    return theta if isinstance(theta, BoundaryTheta) else BoundaryTheta(int(theta))


def canonical_mu(mu: complex) -> complex:
    """Representative of {mu, -mu} with Re mu > 0 (or Im mu >= 0 on the imaginary axis)."""
    mu = complex(mu)
    if mu.real < 0 or (mu.real == 0 and mu.imag < 0):
        return -mu
    return mu


@dataclass(frozen=True)
class SpectralPoint:
    mu: complex
    lam: complex
    multiplicity: int

    @classmethod
    def from_mu(cls, mu: complex, multiplicity: int = 1) -> "SpectralPoint":
        mu = canonical_mu(mu)
        if multiplicity < 1:
            raise ValidationError("multiplicity must be >= 1")
        return cls(mu, mu * mu, int(multiplicity))

    def to_json(self) -> dict:
        return {
            "mu": [self.mu.real, self.mu.imag],
            "lambda": [self.lam.real, self.lam.imag],
            "multiplicity": self.multiplicity,
        }


@dataclass(frozen=True)
class SearchRegion:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    refine_tol: float = 1e-10

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValidationError("search region must have re_min < re_max and im_min < im_max")
        if not self.refine_tol > 0:
            raise ValidationError("refine_tol must be positive")

    def contains(self, z: complex, pad: float = 0.0) -> bool:
        return (self.re_min - pad <= z.real <= self.re_max + pad
                and self.im_min - pad <= z.imag <= self.im_max + pad)

    @property
    def size(self) -> float:
        return max(self.re_max - self.re_min, self.im_max - self.im_min)


def char_det(q: PotentialGrid, theta, mu):
    """Delta(mu) = c(pi, mu) - s'(pi, mu).

    The zero set is the same for both theta values; theta only matters for
    the Green function, so it is validated and otherwise unused here.
    """
    as_theta(theta)
    e = ode.endpoints(q, mu)
    out = e.c - e.s_prime
    return complex(out) if np.ndim(out) == 0 else out


def dirichlet_det(q: PotentialGrid, mu):
    """s(pi, mu); its zeros are the square roots of the Dirichlet eigenvalues."""
    out = ode.endpoints(q, mu).s
    return complex(out) if np.ndim(out) == 0 else out


def degenerate_floor(q: PotentialGrid) -> float:
    return 1e-10 * (1.0 + q.l1_norm())


class DetEvaluator:
    """Memoized vectorized evaluation of one determinant."""

    def __init__(self, det: str, q: PotentialGrid, theta=0):
        if det not in (DELTA, DIRICHLET):
            raise ValidationError(f"unknown determinant {det!r}; use 'delta' or 'dirichlet'")
        self.det = det
        self.q = q
        self.theta = as_theta(theta)
        self._cache: dict[complex, complex] = {}

    def raw(self, z):
        if self.det == DELTA:
            return char_det(self.q, self.theta, z)
        return dirichlet_det(self.q, z)

    def __call__(self, zs) -> np.ndarray:
        zs = np.asarray(zs, dtype=complex).ravel()
        missing = [z for z in dict.fromkeys(zs.tolist()) if z not in self._cache]
        if missing:
            vals = np.atleast_1d(self.raw(np.array(missing)))
            self._cache.update(zip(missing, vals.tolist()))
        return np.array([self._cache[z] for z in zs.tolist()], dtype=complex)


@dataclass
class _Contour:
    """Closed polygonal contour with its determinant samples."""

    points: np.ndarray
    values: np.ndarray

    def winding(self) -> int:
        ratio = np.roll(self.values, -1) / self.values
        total = np.sum(np.angle(ratio))
        return int(round(total / (2 * math.pi)))

    def centroid(self) -> complex | None:
        """First moment (1/2 pi i) sum z dlog f, divided by the winding number."""
        w = self.winding()
        if w == 0:
            return None
        nxt = np.roll(self.values, -1)
        dlog = np.log(np.abs(nxt / self.values)) + 1j * np.angle(nxt / self.values)
        mid = 0.5 * (self.points + np.roll(self.points, -1))
        return complex(np.sum(mid * dlog) / (2j * math.pi * w))


def _trace_contour(f: Callable, vertices: list, min_seg: float, floor: float = 0.0,
                   spacing: float = 0.05, max_points: int = 200000) -> _Contour:
    """Sample f along the closed polygon and refine until phase steps are small."""
    pts = []
    for a, b in zip(vertices, vertices[1:] + vertices[:1]):
        n = max(8, int(math.ceil(abs(b - a) / spacing)))
        pts.append(a + (b - a) * np.arange(n) / n)
    z = np.concatenate(pts)
    vals = f(z)
    if np.max(np.abs(vals)) < floor:
        raise DegenerateDeterminantError(
            "determinant vanishes on the whole contour (identically zero to working precision)"
        )
    while True:
        nz = np.roll(z, -1)
        nv = np.roll(vals, -1)
        with np.errstate(divide="ignore", invalid="ignore"):
            dphi = np.abs(np.angle(nv / vals))
        bad = ~np.isfinite(dphi) | (dphi > PHASE_STEP)
        if not bad.any():
            return _Contour(z, vals)
        seg = np.abs(nz - z)
        if np.any(seg[bad] < min_seg) or z.size > max_points:
            worst = z[np.argmax(np.where(bad, dphi, -1))]
            raise BoundaryTooCloseError(f"zero within {min_seg:.3g} of the contour near mu={worst:.6g}")
        mids = 0.5 * (z[bad] + nz[bad])
        mid_vals = f(mids)
        idx = np.nonzero(bad)[0] + 1
        z = np.insert(z, idx, mids)
        vals = np.insert(vals, idx, mid_vals)


def _box_vertices(box) -> list:
    r0, r1, i0, i1 = box
    return [complex(r0, i0), complex(r1, i0), complex(r1, i1), complex(r0, i1)]


def _circle_winding(f: Callable, center: complex, radius: float, n: int = 64) -> int:
    t = 2 * math.pi * np.arange(n) / n
    z = center + radius * np.exp(1j * t)
    vals = f(z)
    if np.min(np.abs(vals)) == 0:
        raise BoundaryTooCloseError("zero on multiplicity circle")
    for _ in range(12):
        dphi = np.abs(np.angle(np.roll(vals, -1) / vals))
        if np.all(dphi <= PHASE_STEP):
            break
        n *= 2
        t = 2 * math.pi * np.arange(n) / n
        z = center + radius * np.exp(1j * t)
        vals = f(z)
    return _Contour(z, vals).winding()


def multiplicity_radius(mu: complex, refine_tol: float) -> float:
    return max(10.0 * refine_tol, 1e-4 * (1.0 + abs(mu)))


def _newton(f: Callable, seed: complex, multiplicity: int, tol: float, max_iter: int):
    z = complex(seed)
    for _ in range(max_iter):
        step = 1e-5 * (1.0 + abs(z))
        f0, fp, fm = f(np.array([z, z + step, z - step]))
        if f0 == 0:
            return z, True
        deriv = (fp - fm) / (2 * step)
        if deriv == 0 or not np.isfinite(deriv):
            return z, False
        dz = multiplicity * f0 / deriv
        # damp wild jumps; Newton on entire functions can overshoot by whole periods
        limit = 0.5 * (1.0 + abs(z))
        if abs(dz) > limit:
            dz *= limit / abs(dz)
        z -= dz
        if abs(dz) <= tol * (1.0 + abs(z)):
            return z, True
    return z, False


def refine_zero(det: str, q: PotentialGrid, theta, seed: complex, refine_tol: float = 1e-10,
                max_iter: int = 60, multiplicity: int | None = None,
                evaluator: DetEvaluator | None = None) -> SpectralPoint:
    """Newton polish of a zero of the chosen determinant from ``seed``.

    The multiplicity is measured afterwards as the winding number on a small
    circle around the converged point.
    """
    f = evaluator or DetEvaluator(det, q, theta)
    m = multiplicity or 1
    z, ok = _newton(f, seed, m, refine_tol, max_iter)
    if not ok:
        raise NoConvergenceError(f"Newton did not converge from seed {seed}", z)
    mult = _circle_winding(f, z, multiplicity_radius(z, refine_tol))
    if mult < 1:
        raise NoConvergenceError("converged point is not enclosed as a zero", z)
    if multiplicity is None and mult > 1:
        z, ok = _newton(f, z, mult, refine_tol, max_iter)
        if not ok:
            raise NoConvergenceError("modified Newton did not converge", z)
    return SpectralPoint.from_mu(z, mult)


def winding_number(det: str, q: PotentialGrid, theta, region: SearchRegion,
                   evaluator: DetEvaluator | None = None) -> int:
    f = evaluator or DetEvaluator(det, q, theta)
    box = (region.re_min, region.re_max, region.im_min, region.im_max)
    contour = _trace_contour(f, _box_vertices(box), region.refine_tol, degenerate_floor(q))
    return contour.winding()


def find_zeros(det: str, q: PotentialGrid, theta, region: SearchRegion,
               min_box: float | None = None) -> list[SpectralPoint]:
    """All zeros of Delta or s(pi, .) inside ``region`` with multiplicities."""
    f = DetEvaluator(det, q, theta)
    tol = region.refine_tol
    min_box = min_box if min_box is not None else max(1e-6, 1e3 * tol)

    def trace(box):
        return _trace_contour(f, _box_vertices(box), tol)

    root = (region.re_min, region.re_max, region.im_min, region.im_max)
    top = _trace_contour(f, _box_vertices(root), tol, degenerate_floor(q))
    total = top.winding()
    if total < 0:
        raise BoundaryTooCloseError("negative winding number; contour resolution failed")

    found: list[SpectralPoint] = []
    stack = [(root, top)]
    while stack:
        box, contour = stack.pop()
        w = contour.winding()
        if w == 0:
            continue
        size = max(box[1] - box[0], box[3] - box[2])
        if w == 1 or size < min_box:
            pt = _polish_in_box(f, q, theta, box, contour, w, tol)
            if pt is not None:
                found.append(pt)
                continue
            if size < min_box:
                raise NoConvergenceError("could not polish zero in minimal box", contour.centroid() or box[0])
        stack.extend(_split(box, w, trace))

    found.sort(key=lambda p: (round(abs(p.mu), 9), p.mu.real, p.mu.imag))
    if sum(p.multiplicity for p in found) != total:
        raise BoundaryTooCloseError(
            f"zero count mismatch: found {sum(p.multiplicity for p in found)} vs winding {total}"
        )
    return found


def _polish_in_box(f, q, theta, box, contour, w, tol):
    seed = contour.centroid()
    if seed is None:
        return None
    try:
        pt = refine_zero(f.det, q, theta, seed, refine_tol=tol,
                         multiplicity=w if w > 1 else None, evaluator=f)
    except NoConvergenceError:
        return None
    # canonicalization may have flipped the sign of mu
    if not (_in_box(pt.mu, box) or _in_box(-pt.mu, box)) or pt.multiplicity != w:
        return None
    return pt


def _in_box(z: complex, box) -> bool:
    return box[0] <= z.real <= box[1] and box[2] <= z.imag <= box[3]


def _split(box, w, trace):
    r0, r1, i0, i1 = box
    horizontal = (r1 - r0) >= (i1 - i0)
    last_err = None
    for frac in _SPLIT_FRACTIONS:
        if horizontal:
            cut = r0 + frac * (r1 - r0)
            kids = [(r0, cut, i0, i1), (cut, r1, i0, i1)]
        else:
            cut = i0 + frac * (i1 - i0)
            kids = [(r0, r1, i0, cut), (r0, r1, cut, i1)]
        try:
            contours = [trace(k) for k in kids]
        except BoundaryTooCloseError as exc:
            last_err = exc
            continue
        if sum(c.winding() for c in contours) == w:
            return list(zip(kids, contours))
    raise last_err or BoundaryTooCloseError("box split failed to conserve the zero count")
