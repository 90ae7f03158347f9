"""Band-limited target determinants v(mu) = f(mu)/mu.

The density g(t) = sum_k a_k sin(k t) on [0, pi] is stored through its
coefficients, and f(mu) = int_0^pi g(t) sin(mu t) dt is evaluated in closed
form, term by term:

    int_0^pi sin(k t) sin(mu t) dt = (-1)^(k+1) k sin(pi mu) / (k^2 - mu^2).

Every ratio sin(pi mu)/(k^2 - mu^2) is rewritten with numpy's ``sinc`` around
the nearby removable point, so the evaluation is exact and stable at mu = +-k
and at mu = 0 without special-casing.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError

STRIP_HALF_WIDTH = 1.0
GRID_STEP = 0.05
GRID_LENGTH = 40.0
V_BOUND = 0.1
F_BOUND = 1.0


@dataclass(frozen=True)
class TargetDeterminant:
    sine_coeffs: np.ndarray = field(repr=False)
    m: int = 0
    scale: float = 1.0

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.sine_coeffs, dtype=complex)).ravel()
        if a.size < 1:
            raise ValidationError("target needs at least one sine coefficient")
        if not np.all(np.isfinite(a)):
            raise ValidationError("sine coefficients must be finite")
        if int(self.m) != self.m or self.m < 0:
            raise ValidationError("smoothness index m must be a nonnegative integer")
        if not (math.isfinite(self.scale) and self.scale >= 0):
            raise ValidationError("scale must be a finite nonnegative number")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "sine_coeffs", a)
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "scale", float(self.scale))

    @property
    def K(self) -> int:
        return self.sine_coeffs.size

    @property
    def coeffs(self) -> np.ndarray:
        """Scaled coefficients scale * a_k."""
        return self.scale * self.sine_coeffs

    @property
    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def density(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        k = np.arange(1, self.K + 1)
        return np.sin(np.multiply.outer(t, k)) @ self.coeffs

    def to_json(self) -> dict:
        return {
            "sine_coeffs": [[a.real, a.imag] for a in self.sine_coeffs],
            "m": self.m,
            "scale": self.scale,
        }

    @classmethod
    def from_json(cls, doc) -> "TargetDeterminant":
        if not isinstance(doc, dict) or "sine_coeffs" not in doc:
            raise ValidationError("target: expected an object with 'sine_coeffs'")
        rows = doc["sine_coeffs"]
        try:
            coeffs = [complex(r[0], r[1]) if isinstance(r, (list, tuple)) else complex(r) for r in rows]
        except (TypeError, ValueError, IndexError):
            raise ValidationError("target: sine_coeffs must be [re, im] pairs") from None
        return cls(np.array(coeffs), m=doc.get("m", 0), scale=doc.get("scale", 1.0))


def load_target(path) -> TargetDeterminant:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"target file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"target file {path} is not valid JSON: {exc}") from None
    return TargetDeterminant.from_json(doc)


def _sin_over_diff(k: int, mu: np.ndarray) -> np.ndarray:
    """sin(pi mu) / (k^2 - mu^2), stable near mu = k (Re mu >= 0) or mu = -k."""
    sign = (-1.0) ** k
    right = mu.real >= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        # mu = k + d:  sin(pi mu) = (-1)^k sin(pi d),  k^2 - mu^2 = -d (mu + k)
        near_pos = -sign * np.pi * np.sinc(mu - k) / (mu + k)
        # mu = -k + d: sin(pi mu) = (-1)^k sin(pi d),  k^2 - mu^2 = d (k - mu)
        near_neg = sign * np.pi * np.sinc(mu + k) / (k - mu)
    return np.where(right, near_pos, near_neg)


def eval_f(t: TargetDeterminant, mu):
    """f(mu) = int_0^pi g(t) sin(mu t) dt (odd entire function of type pi)."""
    mu_arr = np.asarray(mu, dtype=complex)
    out = np.zeros(mu_arr.shape, dtype=complex)
    for k, a in enumerate(t.coeffs, start=1):
        if a != 0:
            out += a * (-1.0) ** (k + 1) * k * _sin_over_diff(k, mu_arr)
    return complex(out) if out.ndim == 0 else out


def eval_v(t: TargetDeterminant, mu):
    """v(mu) = f(mu)/mu, with v(0) = f'(0)."""
    mu_arr = np.asarray(mu, dtype=complex)
    small = np.abs(mu_arr) < 0.5
    out = np.zeros(mu_arr.shape, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        big = eval_f(t, mu_arr) / mu_arr
    # sin(pi mu)/mu = pi sinc(mu); the k^2 - mu^2 factors are harmless for |mu| < 1/2
    near = np.zeros(mu_arr.shape, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k, a in enumerate(t.coeffs, start=1):
            if a != 0:
                near += a * (-1.0) ** (k + 1) * k / (k * k - mu_arr**2)
    near = near * np.pi * np.sinc(mu_arr)
    out = np.where(small, near, big)
    return complex(out) if out.ndim == 0 else out


def f_sup_bound(t: TargetDeterminant, re_mu: float, half_width: float = STRIP_HALF_WIDTH) -> float:
    """Rigorous bound of |f| on {Re mu >= re_mu, |Im mu| <= half_width}, valid for re_mu^2 > K^2 + w^2.

    |sin(pi mu)| <= cosh(pi w) and |k^2 - mu^2| >= (Re mu)^2 - w^2 - k^2.
    """
    k = np.arange(1, t.K + 1)
    denom = re_mu**2 - half_width**2 - k**2.0
    if np.any(denom <= 0):
        return math.inf
    return float(math.cosh(math.pi * half_width) * np.sum(np.abs(t.coeffs) * k / denom))


@dataclass(frozen=True)
class BoundCheck:
    passed: bool
    N: int
    max_abs_v: float
    max_abs_f: float
    argmax_v: complex
    argmax_f: complex
    tail_bound_v: float
    tail_bound_f: float


def sup_bound_check(t: TargetDeterminant, N: int) -> BoundCheck:
    """Check |v| < 1/10 and |f| < 1 on {|Im mu| <= 1, Re mu >= N}.

    A grid over [N, N+40] x [-1, 1] with step 0.05 is combined with the
    analytic bound :func:`f_sup_bound` beyond N+40.
    """
    re = N + np.arange(int(round(GRID_LENGTH / GRID_STEP)) + 1) * GRID_STEP
    im = np.linspace(-STRIP_HALF_WIDTH, STRIP_HALF_WIDTH, int(round(2 / GRID_STEP)) + 1)
    mu = re[None, :] + 1j * im[:, None]
    fv = np.abs(eval_f(t, mu))
    vv = np.abs(eval_v(t, mu))
    iv = np.unravel_index(np.argmax(vv), vv.shape)
    jf = np.unravel_index(np.argmax(fv), fv.shape)
    edge = N + GRID_LENGTH
    tail_f = f_sup_bound(t, edge)
    tail_v = tail_f / edge
    max_v = float(vv[iv])
    max_f = float(fv[jf])
    passed = max_v < V_BOUND and max_f < F_BOUND and tail_v < V_BOUND and tail_f < F_BOUND
    return BoundCheck(passed, int(N), max_v, max_f, complex(mu[iv]), complex(mu[jf]), tail_v, tail_f)
