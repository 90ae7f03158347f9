"""Fundamental system of u'' - q u + mu^2 u = 0 on [0, pi].

The integrator is the fourth-order Magnus scheme with two Gauss nodes per
grid interval, where q is taken from the local cubic interpolant of the
samples.  Each step is the exact exponential of a traceless 2x2
matrix, so the Wronskian c s' - c' s stays at 1 up to rounding, and the
scheme is symmetric, so mirror-symmetric potentials give c(pi) = s'(pi) to
rounding as well.  Step products are accumulated with vectorized pairwise
reductions (endpoint only) or a log-depth prefix scan (full trajectory).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import IntegrationOverflowError
from .potential import PotentialGrid

OVERFLOW_LIMIT = 1e150
WRONSKIAN_TOL = 1e-8
# batch size limit (steps * mus) for one vectorized sweep
_CHUNK_ELEMENTS = 1 << 21

_GAUSS_OFFSET = np.sqrt(3.0) / 6.0


@dataclass(frozen=True)
class SolutionRecord:
    """c, c', s, s' along the grid for one spectral parameter."""

    mu: complex
    x: np.ndarray
    c: np.ndarray
    c_prime: np.ndarray
    s: np.ndarray
    s_prime: np.ndarray
    # Richardson (h vs h/2) estimate of the error of (c, c', s, s') at pi
    endpoint_error: np.ndarray | None = None

    def wronskian_defect(self) -> float:
        w = self.c * self.s_prime - self.c_prime * self.s
        return float(np.max(np.abs(w - 1.0)))


@dataclass(frozen=True)
class Endpoints:
    """c(pi), c'(pi), s(pi), s'(pi) for an array of mu values."""

    c: np.ndarray
    c_prime: np.ndarray
    s: np.ndarray
    s_prime: np.ndarray
    error: np.ndarray | None = None

    def as_tuple(self):
        return self.c, self.c_prime, self.s, self.s_prime


def _gauss_samples(q: PotentialGrid):
    """Potential at the two Gauss nodes of every interval (cubic interpolation)."""
    return q.interval_values(0.5 - _GAUSS_OFFSET), q.interval_values(0.5 + _GAUSS_OFFSET)


def _step_matrices(gauss, h: float, mus: np.ndarray):
    """Magnus-4 propagators for every grid interval and every mu.

    Returns the four entries, each of shape (n_steps, n_mu).
    """
    qa = gauss[0][:, None]
    qb = gauss[1][:, None]
    mu2 = (mus * mus)[None, :]
    p = 0.5 * (qa + qb) - mu2
    delta = (np.sqrt(3.0) * h * h / 12.0) * (qa - qb)
    delta = np.broadcast_to(delta, p.shape)
    z = delta * delta + h * h * p
    r = np.sqrt(z)
    small = np.abs(r) < 1e-3
    with np.errstate(invalid="ignore", divide="ignore"):
        shc = np.where(small, 1.0 + z / 6.0 + z * z / 120.0 + z**3 / 5040.0, np.sinh(r) / r)
    ch = np.cosh(r)
    e11 = ch + shc * delta
    e22 = ch - shc * delta
    e12 = shc * h
    e21 = shc * (h * p)
    return e11, e12, e21, e22


def _mul(a, b):
    """Entrywise 2x2 product a @ b on stacked component tuples."""
    a11, a12, a21, a22 = a
    b11, b12, b21, b22 = b
    return (
        a11 * b11 + a12 * b21,
        a11 * b12 + a12 * b22,
        a21 * b11 + a22 * b21,
        a21 * b12 + a22 * b22,
    )


def _reduce(mats):
    """Ordered product E_{n-1} ... E_0 along axis 0."""
    while mats[0].shape[0] > 1:
        n = mats[0].shape[0]
        m = n - (n % 2)
        later = tuple(e[1:m:2] for e in mats)
        earlier = tuple(e[0:m:2] for e in mats)
        prod = _mul(later, earlier)
        if n % 2:
            prod = tuple(np.concatenate([pe, e[-1:]], axis=0) for pe, e in zip(prod, mats))
        mats = prod
    return tuple(e[0] for e in mats)


def _scan(mats):
    """Inclusive prefix products P_k = E_k ... E_0 along axis 0."""
    cur = tuple(np.array(e) for e in mats)
    n = cur[0].shape[0]
    d = 1
    while d < n:
        upd = _mul(tuple(e[d:] for e in cur), tuple(e[:-d] for e in cur))
        for e, u in zip(cur, upd):
            e[d:] = u
        d *= 2
    return cur


def _chunks(n_steps: int, n_mu: int):
    size = max(1, _CHUNK_ELEMENTS // max(n_steps, 1))
    for start in range(0, n_mu, size):
        yield slice(start, min(start + size, n_mu))


def _first_bad_index(q: PotentialGrid, mu: complex) -> int:
    traj = _trajectory(q, np.array([mu], dtype=complex), check=False)
    mag = np.max(np.abs(np.stack(traj)), axis=0)[:, 0]
    bad = ~np.isfinite(mag) | (mag > OVERFLOW_LIMIT)
    return int(np.argmax(bad)) if bad.any() else q.n_points - 1


def _trajectory(q: PotentialGrid, mus: np.ndarray, check: bool = True):
    """(c, c', s, s') with shape (n_points, n_mu)."""
    n = q.n_points
    out = [np.empty((n, mus.size), dtype=complex) for _ in range(4)]
    gauss = _gauss_samples(q)
    for sl in _chunks(n - 1, mus.size):
        prefix = _scan(_step_matrices(gauss, q.h, mus[sl]))
        p11, p12, p21, p22 = prefix
        c, cp, s, sp = out
        c[0, sl], cp[0, sl], s[0, sl], sp[0, sl] = 1.0, 0.0, 0.0, 1.0
        c[1:, sl], cp[1:, sl], s[1:, sl], sp[1:, sl] = p11, p21, p12, p22
    if check:
        mag = np.max(np.abs(np.stack(out)), axis=0)
        bad = ~np.isfinite(mag) | (mag > OVERFLOW_LIMIT)
        if bad.any():
            col = int(np.argmax(bad.any(axis=0)))
            raise IntegrationOverflowError(int(np.argmax(bad[:, col])), mus[col])
    return tuple(out)


def _endpoint_products(q: PotentialGrid, mus: np.ndarray):
    res = [np.empty(mus.size, dtype=complex) for _ in range(4)]
    gauss = _gauss_samples(q)
    for sl in _chunks(q.n_points - 1, mus.size):
        e11, e12, e21, e22 = _reduce(_step_matrices(gauss, q.h, mus[sl]))
        res[0][sl], res[1][sl], res[2][sl], res[3][sl] = e11, e21, e12, e22
    mag = np.max(np.abs(np.stack(res)), axis=0)
    bad = ~np.isfinite(mag) | (mag > OVERFLOW_LIMIT)
    if bad.any():
        k = int(np.argmax(bad))
        raise IntegrationOverflowError(_first_bad_index(q, mus[k]), mus[k])
    return res


def endpoints(q: PotentialGrid, mu, error_estimate: bool = False, extrapolate: bool = False) -> Endpoints:
    """Endpoint values at x = pi for scalar or array ``mu``.

    With ``error_estimate`` the same potential is re-integrated on the grid
    of half spacing and the Richardson difference (h vs h/2)/15 is attached.
    ``extrapolate`` returns the Richardson-extrapolated values instead.
    """
    mus = np.atleast_1d(np.asarray(mu, dtype=complex))
    shape = np.shape(mu)
    coarse = _endpoint_products(q, mus.ravel())
    err = None
    vals = coarse
    if error_estimate or extrapolate:
        fine = _endpoint_products(q.refined(), mus.ravel())
        diff = [(f - c) / 15.0 for f, c in zip(fine, coarse)]
        err = np.abs(np.stack(diff)).reshape((4,) + shape)
        if extrapolate:
            vals = [f + d for f, d in zip(fine, diff)]
    c, cp, s, sp = (v.reshape(shape) for v in vals)
    return Endpoints(c, cp, s, sp, err)


def fundamental_batch(q: PotentialGrid, mus) -> tuple[np.ndarray, ...]:
    """c, c', s, s' on the grid for many mu at once, each of shape (n_mu, n_points)."""
    mus = np.atleast_1d(np.asarray(mus, dtype=complex)).ravel()
    return tuple(np.ascontiguousarray(a.T) for a in _trajectory(q, mus))


def solve_fundamental(q: PotentialGrid, mu: complex, richardson: bool = True) -> SolutionRecord:
    mus = np.array([complex(mu)])
    c, cp, s, sp = (a[:, 0] for a in _trajectory(q, mus))
    err = None
    if richardson:
        fine = _endpoint_products(q.refined(), mus)
        coarse = (c[-1], cp[-1], s[-1], sp[-1])
        err = np.array([abs(f[0] - v) / 15.0 for f, v in zip(fine, coarse)])
    return SolutionRecord(complex(mu), q.x, c, cp, s, sp, err)


def eval_at_pi(rec: SolutionRecord) -> tuple[complex, complex, complex, complex]:
    """(c(pi), c'(pi), s(pi), s'(pi))."""
    return (complex(rec.c[-1]), complex(rec.c_prime[-1]), complex(rec.s[-1]), complex(rec.s_prime[-1]))


def _cumulative(f: np.ndarray, h: float) -> np.ndarray:
    # cumulative_simpson drops imaginary parts, so integrate the parts separately
    re = cumulative_simpson(f.real, dx=h, initial=0.0)
    im = cumulative_simpson(f.imag, dx=h, initial=0.0)
    return re + 1j * im


def solve_inhomogeneous(q: PotentialGrid, mu: complex, rhs, derivative: bool = False):
    """Particular solution of u'' - q u + mu^2 u = rhs with u(0) = u'(0) = 0.

    Variation of parameters over the fundamental system (Wronskian 1):
    u(x) = s(x) int_0^x c rhs - c(x) int_0^x s rhs.
    """
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.shape != (q.n_points,):
        raise ValueError("rhs must be sampled on the potential grid")
    rec = solve_fundamental(q, mu, richardson=False)
    ic = _cumulative(rec.c * rhs, q.h)
    is_ = _cumulative(rec.s * rhs, q.h)
    u = rec.s * ic - rec.c * is_
    if derivative:
        return u, rec.s_prime * ic - rec.c_prime * is_
    return u
