"""Green function, residue projections and completeness diagnostics.

Convention: (d^2/dx^2 - q + mu^2) int G(., xi) f(xi) dxi = -f, together with
both boundary conditions in x.  With Delta = c(pi) - s'(pi), T = c(pi) + s'(pi)
and sigma = (-1)^theta,

    G = Phi / (2 Delta) + g,
    Phi = 2 sigma [s(x)c(xi) - c(x)s(xi)] - T [s(x)c(xi) + c(x)s(xi)]
          + 2 [c'(pi) s(x)s(xi) + s(pi) c(x)c(xi)],
    g = -sgn(x - xi) [s(x)c(xi) - c(x)s(xi)] / 2.

For theta = 0 this Phi is the combined four-bracket expression; the
orientation of g is the one that produces the jump -1 in dG/dx at x = xi.
G - g is a rank-two kernel in the fundamental system, which makes residue
projections a single matrix product over the contour nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import qr, svdvals

from . import ode
from .errors import DegenerateDeterminantError, EnclosureError, NearEigenvalueError, ValidationError
from .potential import PotentialGrid
from .spectral import BoundaryTheta, SpectralPoint, as_theta, degenerate_floor

CONTOUR_POINTS = 256
DOUBLING_TOL = 1e-6
RANK_FLOOR = 1e-6
_SHRINK_STEPS = 4
# extra spectral parameters used to tell "near an eigenvalue" from "identically zero"
_PROBE_OFFSETS = (0.731 + 0.213j, 1.917 - 0.388j, 3.141 + 0.577j)


def _core(theta: BoundaryTheta, cpi, cppi, spi, sppi):
    """Entries of the 2x2 matrix with G - g = [c(x), s(x)] M [c(xi), s(xi)]^T / (2 Delta)."""
    sig = theta.sign
    T = cpi + sppi
    return 2.0 * spi, -2.0 * sig - T, 2.0 * sig - T, 2.0 * cppi


def phi_combined(theta, endpoints, cx, sx, ck, sk):
    """Phi from endpoint values (c, c', s, s') at pi and c, s at x and xi (broadcasting)."""
    m_cc, m_cs, m_sc, m_ss = _core(as_theta(theta), *endpoints)
    return m_cc * cx * ck + m_cs * cx * sk + m_sc * sx * ck + m_ss * sx * sk


def phi_four_bracket(endpoints, cx, sx, ck, sk):
    """Uncombined four-bracket form of Phi for theta = 0."""
    cpi, cppi, spi, sppi = endpoints
    a = -ck * spi - sk * (-1.0 - cpi)
    b = ck * (-1.0 + sppi) - sk * cppi
    return sx * (cppi * a - (1.0 - cpi) * b) - cx * ((1.0 + sppi) * a + spi * b)


def phi_term_scale(theta, endpoints, cx, sx, ck, sk):
    """Sum of the magnitudes of the terms of Phi; the natural scale for its rounding error."""
    m_cc, m_cs, m_sc, m_ss = _core(as_theta(theta), *endpoints)
    return (abs(m_cc * cx * ck) + abs(m_cs * cx * sk) + abs(m_sc * sx * ck) + abs(m_ss * sx * sk))


def phi_forms_defect(q: PotentialGrid, count: int = 50, seed: int = 20240601,
                     re_mu=(0.2, 10.0), im_mu=(-2.0, 2.0)) -> float:
    """max |combined - four-bracket| / term scale over random (x, xi, mu) triples (theta = 0)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(int(count)):
        mu = complex(rng.uniform(*re_mu), rng.uniform(*im_mu))
        i, k = rng.integers(0, q.n_points, size=2)
        rec = ode.solve_fundamental(q, mu, richardson=False)
        ends = ode.eval_at_pi(rec)
        args = (rec.c[i], rec.s[i], rec.c[k], rec.s[k])
        a = phi_combined(0, ends, *args)
        b = phi_four_bracket(ends, *args)
        worst = max(worst, abs(a - b) / max(phi_term_scale(0, ends, *args), 1e-300))
    return float(worst)


def g_part(cx, sx, ck, sk, sign):
    """Free part of the kernel; ``sign`` is sgn(x - xi)."""
    return -0.5 * sign * (sx * ck - cx * sk)


@dataclass(frozen=True)
class GreenSample:
    mu: complex
    theta: int
    x: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    delta: complex = 0j

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    def apply(self, f) -> np.ndarray:
        """u(x) = int_0^pi G(x, xi) f(xi) dxi by the trapezoid rule."""
        return trapezoid(self.values * np.asarray(f)[None, :], dx=self.h, axis=1)


def _determinant_guard(q: PotentialGrid, theta: BoundaryTheta, mu: complex, ends) -> complex:
    cpi, _, _, sppi = ends
    delta = complex(cpi - sppi)
    floor = degenerate_floor(q) * max(1.0, abs(cpi) + abs(sppi))
    if abs(delta) >= floor:
        return delta
    probes = ode.endpoints(q, np.array([mu + d for d in _PROBE_OFFSETS]))
    if np.all(np.abs(probes.c - probes.s_prime) < degenerate_floor(q) * np.maximum(1.0, np.abs(probes.c) + np.abs(probes.s_prime))):
        raise DegenerateDeterminantError(
            "characteristic determinant vanishes identically; the Green function does not exist"
        )
    raise NearEigenvalueError(f"|Delta(mu)| = {abs(delta):.3g} at mu={mu}: mu is (numerically) an eigenvalue")


def green_function(q: PotentialGrid, theta, mu: complex) -> GreenSample:
    """G(x_i, xi_j, mu) on the potential grid."""
    theta = as_theta(theta)
    mu = complex(mu)
    rec = ode.solve_fundamental(q, mu, richardson=False)
    ends = ode.eval_at_pi(rec)
    delta = _determinant_guard(q, theta, mu, ends)
    cx, sx = rec.c[:, None], rec.s[:, None]
    ck, sk = rec.c[None, :], rec.s[None, :]
    sign = np.sign(np.subtract.outer(rec.x, rec.x))
    vals = phi_combined(theta, ends, cx, sx, ck, sk) / (2.0 * delta) + g_part(cx, sx, ck, sk, sign)
    return GreenSample(mu, theta.theta, rec.x, vals, delta)


def boundary_residuals(q: PotentialGrid, theta, mu: complex):
    """Residuals of u'(0) + sigma u'(pi) and u(0) - sigma u(pi) for u = G(., xi), per interior xi.

    End values and x-derivatives come straight from the fundamental system,
    so no finite differencing enters.  Also returns a scale of G at the ends.
    """
    theta = as_theta(theta)
    rec = ode.solve_fundamental(q, complex(mu), richardson=False)
    ends = ode.eval_at_pi(rec)
    delta = _determinant_guard(q, theta, complex(mu), ends)
    cpi, cppi, spi, sppi = ends
    ck, sk = rec.c, rec.s
    m_cc, m_cs, m_sc, m_ss = _core(theta, *ends)

    def value(cx, sx, sign):
        return (m_cc * cx * ck + m_cs * cx * sk + m_sc * sx * ck + m_ss * sx * sk) / (2 * delta) + g_part(cx, sx, ck, sk, sign)

    # at x = 0, xi > 0 lies to the right (sign -1); at x = pi it lies to the left
    u0 = value(1.0, 0.0, -1.0)
    du0 = value(0.0, 1.0, -1.0)
    upi = value(cpi, spi, 1.0)
    dupi = value(cppi, sppi, 1.0)
    sig = theta.sign
    interior = slice(1, -1)
    scale = max(float(np.max(np.abs(u0))), float(np.max(np.abs(upi))), float(np.max(np.abs(du0))), 1.0)
    return (np.abs(du0 + sig * dupi)[interior], np.abs(u0 - sig * upi)[interior], scale)


def derivative_jump(sample: GreenSample, j: int) -> complex:
    """dG/dx(xi+, xi) - dG/dx(xi-, xi) at xi = x_j from second-order one-sided differences."""
    g = sample.values[:, j]
    n = g.size
    if not 2 <= j <= n - 3:
        raise ValidationError("jump needs two grid points on each side of xi")
    right = (-3.0 * g[j] + 4.0 * g[j + 1] - g[j + 2]) / (2.0 * sample.h)
    left = (3.0 * g[j] - 4.0 * g[j - 1] + g[j - 2]) / (2.0 * sample.h)
    return complex(right - left)


def leading_form(theta, mu: complex, x, xi):
    """Large-mu leading term of mu (G - g) Delta: sigma sin mu(x - xi) + sin mu(pi - x - xi)."""
    sig = as_theta(theta).sign
    x = np.asarray(x)
    xi = np.asarray(xi)
    return sig * np.sin(mu * (x - xi)) + np.sin(mu * (np.pi - x - xi))


def asymptotic_defect(q: PotentialGrid, theta, mu: complex, stride: int = 1) -> float:
    """max |mu Phi/2 - leading_form| over the (strided) grid; decays like 1/mu."""
    theta = as_theta(theta)
    rec = ode.solve_fundamental(q, complex(mu), richardson=False)
    ends = ode.eval_at_pi(rec)
    sl = slice(None, None, max(1, int(stride)))
    c, s, x = rec.c[sl], rec.s[sl], rec.x[sl]
    phi = phi_combined(theta, ends, c[:, None], s[:, None], c[None, :], s[None, :])
    lead = leading_form(theta, complex(mu), x[:, None], x[None, :])
    return float(np.max(np.abs(complex(mu) * phi / 2.0 - lead)))



def projection_radius(point: SpectralPoint, others) -> float:
    """Half the lambda-distance from ``point`` to the nearest other eigenvalue."""
    dists = [abs(p.lam - point.lam) for p in others if abs(p.lam - point.lam) > 1e-12 * (1 + abs(point.lam))]
    if not dists:
        return 0.5 * (1.0 + abs(point.lam))
    return 0.5 * min(dists)


def trapezoid_weights(x: np.ndarray) -> np.ndarray:
    h = float(x[1] - x[0])
    w = np.full(x.size, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True)
class ProjectionKernel:
    """Kernel P(x, xi) = W^-1/2 basis @ coeff, with W the trapezoid weights.

    ``basis`` has orthonormal columns, so the L2 operator structure of P
    (norms, singular values, compositions) lives entirely in the small
    matrix ``coeff * W^1/2``.
    """

    center: SpectralPoint
    x: np.ndarray = field(repr=False)
    basis: np.ndarray = field(repr=False)
    coeff: np.ndarray = field(repr=False)
    contour_radius: float = 0.0
    n_contour: int = CONTOUR_POINTS
    doubling_change: float = 0.0

    @classmethod
    def from_dense(cls, center, x, values, radius: float = 0.0, floor: float = 1e-15) -> "ProjectionKernel":
        r = np.sqrt(trapezoid_weights(x))
        u, sv, vh = np.linalg.svd(r[:, None] * values * r[None, :])
        k = max(1, int(np.count_nonzero(sv > floor * sv[0])))
        return cls(center, x, u[:, :k], (sv[:k, None] * vh[:k]) / r[None, :], radius)

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(trapezoid_weights(self.x))

    @cached_property
    def values(self) -> np.ndarray:
        return (self.basis / self.sqrt_weights[:, None]) @ self.coeff

    def _weighted_coeff(self) -> np.ndarray:
        return self.coeff * self.sqrt_weights[None, :]

    def trace(self) -> complex:
        return complex(np.einsum("ik,ki,i->", self.basis, self.coeff, self.sqrt_weights))

    def hs_norm(self) -> float:
        return float(np.linalg.norm(self._weighted_coeff()))

    def _middle(self, other: "ProjectionKernel") -> np.ndarray:
        # coeff W (W^-1/2 basis_other)
        return self._weighted_coeff() @ other.basis

    def compose_values(self, other: "ProjectionKernel") -> np.ndarray:
        """Kernel of the composition self o other."""
        return (self.basis / self.sqrt_weights[:, None]) @ (self._middle(other) @ other.coeff)

    def product_norm(self, other: "ProjectionKernel") -> float:
        """Hilbert-Schmidt norm of self o other."""
        return float(np.linalg.norm(self._middle(other) @ other._weighted_coeff()))

    def idempotence_defect(self) -> float:
        wc = self._weighted_coeff()
        return float(np.linalg.norm(self._middle(self) @ wc - wc)) / self.hs_norm()

    def singular_values(self) -> np.ndarray:
        return svdvals(self._weighted_coeff(), check_finite=False)

    def rank(self, floor: float = RANK_FLOOR) -> int:
        sv = self.singular_values()
        return int(np.count_nonzero(sv > floor * sv[0]))


def _contour_terms(q: PotentialGrid, theta: BoundaryTheta, lam_c: complex, radius: float,
                   phases: np.ndarray, floor: float, total: int):
    """Fundamental solutions and right factors at lambda_j = lam_c + r e^{i phase_j}.

    P = sum_j [c_j(x), s_j(x)] . right_j(xi) approximates the contour
    integral with the trapezoid rule on ``total`` equally spaced nodes.
    """
    lam = lam_c + radius * np.exp(1j * phases)
    c, cp, s, sp = ode.fundamental_batch(q, np.sqrt(lam))
    cpi, cppi, spi, sppi = c[:, -1], cp[:, -1], s[:, -1], sp[:, -1]
    delta = cpi - sppi
    if np.min(np.abs(delta)) < floor:
        raise NearEigenvalueError("projection contour passes through an eigenvalue")
    m_cc, m_cs, m_sc, m_ss = _core(theta, cpi, cppi, spi, sppi)
    # -1/(2 pi i) d lambda = -(r e^{i phase}) dphase / (2 pi)
    wt = -(radius * np.exp(1j * phases)) / total / (2.0 * delta)
    right_c = (wt * m_cc)[:, None] * c + (wt * m_cs)[:, None] * s
    right_s = (wt * m_sc)[:, None] * c + (wt * m_ss)[:, None] * s
    return c, s, np.concatenate([right_c, right_s], axis=0), delta


def _mode_basis(c_all: np.ndarray, s_all: np.ndarray, sqrt_w: np.ndarray, floor: float = 1e-15):
    """Orthonormal basis (after W^1/2 weighting) for the span of all node functions.

    Node functions are analytic in lambda on the circle, so their discrete
    Fourier modes decay geometrically and only a few carry weight.
    """
    cols = []
    for block in (c_all, s_all):
        modes = np.fft.fft(block, axis=0)
        norms = np.linalg.norm(modes, axis=1)
        cols.append(modes[norms > floor * norms.max()])
    cand = (np.concatenate(cols, axis=0) * sqrt_w[None, :]).T
    Q, R, _ = qr(cand, mode="economic", pivoting=True)
    d = np.abs(np.diagonal(R))
    keep = int(np.count_nonzero(d > floor * d[0]))
    return Q[:, :keep]


def _winding(values: np.ndarray) -> int:
    steps = np.angle(np.roll(values, -1) / values)
    if np.max(np.abs(steps)) > 0.5 * math.pi:
        raise EnclosureError("determinant phase is under-resolved on the projection contour")
    return int(round(np.sum(steps) / (2 * math.pi)))


def spectral_projection(q: PotentialGrid, theta, point: SpectralPoint, radius: float,
                        n_contour: int = CONTOUR_POINTS, doubling_tol: float = DOUBLING_TOL) -> ProjectionKernel:
    """Residue projection P = -(1/2 pi i) oint G d lambda around ``point.lam``.

    The free part g is entire in lambda and drops out.  The circle must
    enclose exactly the zeros belonging to ``point`` (checked by winding
    number).  The rule on 2n nodes is compared with the rule on n nodes; if
    they differ by more than ``doubling_tol`` (relative, Hilbert-Schmidt)
    the radius is halved and the check repeated.
    """
    theta = as_theta(theta)
    if not radius > 0:
        raise ValidationError("contour radius must be positive")
    floor = degenerate_floor(q)
    sqrt_w = np.sqrt(trapezoid_weights(q.x))
    r = float(radius)
    n = int(n_contour)
    for _ in range(_SHRINK_STEPS):
        phases = 2 * math.pi * np.arange(n) / n
        c0, s0, right0, delta = _contour_terms(q, theta, point.lam, r, phases, floor, 2 * n)
        count = _winding(delta)
        if count != point.multiplicity:
            raise EnclosureError(
                f"contour |lambda - {point.lam:.6g}| = {r:.3g} encloses {count} zeros, expected {point.multiplicity}"
            )
        c1, s1, right1, _ = _contour_terms(q, theta, point.lam, r, phases + math.pi / n, floor, 2 * n)
        c_all = np.empty((2 * n, q.n_points), dtype=complex)
        s_all = np.empty_like(c_all)
        c_all[0::2], c_all[1::2] = c0, c1
        s_all[0::2], s_all[1::2] = s0, s1
        Q = _mode_basis(c_all, s_all, sqrt_w)
        half0 = (Q.conj().T @ (np.concatenate([c0, s0], axis=0) * sqrt_w[None, :]).T) @ right0
        half1 = (Q.conj().T @ (np.concatenate([c1, s1], axis=0) * sqrt_w[None, :]).T) @ right1
        fine = half0 + half1
        # the n-node rule is 2 * half0
        change = float(np.linalg.norm((half1 - half0) * sqrt_w[None, :])
                       / max(np.linalg.norm(fine * sqrt_w[None, :]), 1e-300))
        if change < doubling_tol:
            return ProjectionKernel(point, q.x, Q, fine, r, 2 * n, change)
        r *= 0.5
    raise EnclosureError(f"contour quadrature did not settle (relative change {change:.3g})")


def projection_norm(p: ProjectionKernel) -> float:
    """L2(0, pi) operator norm of the projection kernel."""
    return float(p.singular_values()[0])


@dataclass(frozen=True)
class CompletenessVerdict:
    verdict: str
    epsilon: float
    defect_eps: float
    defect_total: float
    derivatives_0: tuple
    derivatives_pi: tuple
    mismatch_mirror: int | None
    mismatch_literal: int | None

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "epsilon": self.epsilon,
            "defect_eps": self.defect_eps,
            "defect_total": self.defect_total,
            "derivatives_0": [[z.real, z.imag] for z in self.derivatives_0],
            "derivatives_pi": [[z.real, z.imag] for z in self.derivatives_pi],
            "mismatch_k_mirror": self.mismatch_mirror,
            "mismatch_k_literal": self.mismatch_literal,
        }


LIKELY_COMPLETE = "likely-complete"
LIKELY_INCOMPLETE = "likely-incomplete"
INCONCLUSIVE = "inconclusive"
_MAX_ORDER = 4
_FIT_DEGREE = 8
_FIT_WINDOW = 0.15


def _end_derivatives(values: np.ndarray, h: float) -> np.ndarray:
    """q^(k)(0), k = 0..4, from a least-squares polynomial fit near x = 0."""
    n = max(_FIT_DEGREE + 1, int(round(_FIT_WINDOW / h)) + 1)
    n = min(n, values.size)
    deg = min(_FIT_DEGREE, n - 1)
    t = h * np.arange(n)
    re = np.polynomial.Polynomial.fit(t, values[:n].real, deg, domain=[0, t[-1]], window=[0, t[-1]])
    im = np.polynomial.Polynomial.fit(t, values[:n].imag, deg, domain=[0, t[-1]], window=[0, t[-1]])
    out = []
    for k in range(_MAX_ORDER + 1):
        out.append(complex(re.deriv(k)(0.0) if k else re(0.0), im.deriv(k)(0.0) if k else im(0.0)))
    return np.array(out)


def completeness_heuristic(q: PotentialGrid, theta, epsilon: float, tol: float = 1e-8) -> CompletenessVerdict:
    """Symmetry-based guess whether the root functions are complete.

    Mirror symmetry q(x) = q(pi - x) near an end means incompleteness.  A
    mismatch between the endpoint jets means completeness; the jets are
    compared in two readings of the criterion, q^(k)(0) against
    (-1)^k q^(k)(pi) (mirror) and against -q^(k)(pi) (literal), and the
    verdict is inconclusive when the readings disagree.
    """
    as_theta(theta)
    if not (epsilon > 0):
        raise ValidationError("epsilon must be positive")
    v = q.values
    mirror = v[::-1]
    diff = np.abs(v - mirror)
    near = q.x <= min(epsilon, math.pi / 2) + 1e-15
    d_eps = float(np.max(diff[near]))
    d_all = float(np.max(diff))
    scale = 1.0 + q.sup_norm()
    d0 = _end_derivatives(v, q.h)
    # derivatives of q(pi - x) at x = 0 are (-1)^k q^(k)(pi)
    dpi_mirror = _end_derivatives(mirror, q.h)
    signs = (-1.0) ** np.arange(_MAX_ORDER + 1)
    dpi = dpi_mirror * signs
    width = max(_FIT_WINDOW, (_FIT_DEGREE + 1) * q.h)
    tol_k = tol * scale / width ** np.arange(_MAX_ORDER + 1)
    k_mirror = _first_mismatch(np.abs(d0 - dpi_mirror), tol_k)
    k_literal = _first_mismatch(np.abs(d0 + dpi), tol_k)
    if d_eps <= tol * scale:
        verdict = LIKELY_INCOMPLETE
    elif k_mirror is not None and k_literal is not None:
        verdict = LIKELY_COMPLETE
    else:
        verdict = INCONCLUSIVE
    return CompletenessVerdict(verdict, float(epsilon), d_eps, d_all, tuple(d0), tuple(dpi),
                               k_mirror, k_literal)


def _first_mismatch(gaps: np.ndarray, tol_k: np.ndarray):
    bad = np.nonzero(gaps > tol_k)[0]
    return int(bad[0]) if bad.size else None
