"""Potential reconstruction from a target determinant via the Gelfand-Levitan equation.

Pipeline: choose N so the target is small on the strip, perturb the first N
Dirichlet nodes, pick the norming roots c_n, form the weights w_n, assemble
the kernel F, solve K + F + int K F = 0 for every upper limit x at once, and
read off q(x) = 2 d/dx K(x, x).

The nested systems for all x are, up to a low-rank change in their last
columns, the leading principal blocks of a single matrix, so one unpivoted
LU factorization serves all of them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import hankel, null_space, solve_triangular, svdvals, toeplitz
from scipy.linalg.lapack import get_lapack_funcs

from . import ode
from .errors import (
    ConstructionError,
    IllConditionedError,
    NumericalError,
    TailTooLargeError,
    TargetTooLargeError,
    ValidationError,
)
from .potential import PotentialGrid
from .spectral import DIRICHLET, refine_zero
from .target import TargetDeterminant, eval_v, sup_bound_check

N_FLOOR = 2
N_MAX = 256
DEFAULT_M = 64
COND_MAX = 1e8
TAIL_ANALYTIC = "analytic"
TAIL_TRUNCATE = "truncate"
TAIL_TOL = 1e-2
_LU_BLOCK = 64
_COND_SAMPLES = 16
_TAIL_TERMS = 100_000


def choose_N(t: TargetDeterminant, n_floor: int = N_FLOOR, n_max: int = N_MAX) -> int:
    """Smallest N >= n_floor for which the strip bounds hold."""
    for N in range(n_floor, n_max + 1):
        if sup_bound_check(t, N).passed:
            return N
    chk = sup_bound_check(t, n_max)
    raise TargetTooLargeError(
        f"no N <= {n_max} satisfies |v| < 1/10, |f| < 1 on the strip "
        f"(at N={n_max}: max|v|={chk.max_abs_v:.3g}, max|f|={chk.max_abs_f:.3g}); reduce the scale"
    )


def select_N(t: TargetDeterminant, n_floor: int = N_FLOOR, n_max: int = N_MAX) -> int:
    """Perturbation size used by the pipeline; the zero target needs none."""
    return 0 if t.is_zero else choose_N(t, n_floor, n_max)


def build_mu_sequence(N: int, count: int) -> np.ndarray:
    if N < 0 or count <= N:
        raise ValidationError(f"need count > N >= 0, got N={N}, count={count}")
    n = np.arange(1, count + 1, dtype=float)
    return np.where(n <= N, N + 0.4 + 0.2 * n / (N + 1), n)


def _dsinc(x: np.ndarray) -> np.ndarray:
    """Derivative of numpy's normalized sinc."""
    small = np.abs(x) < 1e-3
    with np.errstate(divide="ignore", invalid="ignore"):
        big = (np.cos(np.pi * x) - np.sinc(x)) / x
    series = -(np.pi**2 / 3.0) * x + (np.pi**4 / 30.0) * x**3
    return np.where(small, series, big)


def eval_s_and_derivative(mu_seq, mu, N: int | None = None):
    """s(mu) = (sin(pi mu)/mu) prod_{n<=N} (mu_n^2 - mu^2)/(n^2 - mu^2) and its derivative.

    The factor with a vanishing denominator near mu = +-j is merged with
    sin(pi mu) into a sinc, so every factor stays bounded and nonsingular.
    """
    mu_seq = np.asarray(mu_seq, dtype=float)
    if N is None:
        N = int(np.count_nonzero(mu_seq != np.arange(1, mu_seq.size + 1)))
    nodes = mu_seq[:N]
    mus = np.atleast_1d(np.asarray(mu, dtype=complex))
    shape = np.shape(mu)
    mus = mus.ravel()
    j = np.rint(mus.real).astype(int)
    aj = np.abs(j)
    merged = (aj >= 1) & (aj <= N)
    d = mus - j
    sign = np.where(j % 2 == 0, 1.0, -1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        # sin(pi mu) / (mu (j^2 - mu^2)) = -(-1)^j pi sinc(d) / (mu (mu + j))
        den = mus * (mus + j)
        phi_m = -sign * np.pi * np.sinc(d) / den
        dphi_m = -sign * np.pi * (_dsinc(d) / den - np.sinc(d) * (2 * mus + j) / den**2)
        phi_p = np.sin(np.pi * mus) / mus
        dphi_p = (np.pi * np.cos(np.pi * mus) * mus - np.sin(np.pi * mus)) / mus**2
    zero = j == 0
    phi = np.where(merged, phi_m, np.where(zero, np.pi * np.sinc(mus), phi_p))
    dphi = np.where(merged, dphi_m, np.where(zero, np.pi * _dsinc(mus), dphi_p))
    if N == 0:
        return _shape(phi, shape), _shape(dphi, shape)

    # remaining factors, shape (n_mu, 2N): numerators then reciprocal denominators
    m2 = (mus * mus)[:, None]
    k = np.arange(1, N + 1, dtype=float)[None, :]
    num = nodes[None, :] ** 2 - m2
    dnum = np.broadcast_to(-2.0 * mus[:, None], num.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / (k**2 - m2)
        dinv = 2.0 * mus[:, None] * inv**2
    skip = merged[:, None] & (k == aj[:, None])
    inv = np.where(skip, 1.0, inv)
    dinv = np.where(skip, 0.0, dinv)
    fac = np.concatenate([phi[:, None], num, inv], axis=1)
    dfac = np.concatenate([dphi[:, None], dnum, dinv], axis=1)
    ones = np.ones((fac.shape[0], 1), dtype=complex)
    prefix = np.cumprod(np.concatenate([ones, fac[:, :-1]], axis=1), axis=1)
    suffix = np.cumprod(np.concatenate([ones, fac[:, :0:-1]], axis=1), axis=1)[:, ::-1]
    s = prefix[:, -1] * fac[:, -1]
    ds = np.sum(dfac * prefix * suffix, axis=1)
    return _shape(s, shape), _shape(ds, shape)


def _shape(a: np.ndarray, shape):
    return complex(a[0]) if shape == () else a.reshape(shape)


def select_roots(t_or_v, mu_seq) -> np.ndarray:
    """Roots of z^2 - v(mu_n) z - 1 = 0 lying in the disk |z - (-1)^n| < 1/2."""
    mu_seq = np.asarray(mu_seq, dtype=float)
    if isinstance(t_or_v, TargetDeterminant):
        v = np.asarray(eval_v(t_or_v, mu_seq), dtype=complex)
    else:
        v = np.asarray(t_or_v, dtype=complex)
    target = np.where(np.arange(1, mu_seq.size + 1) % 2 == 0, 1.0, -1.0)
    root = np.sqrt(v * v + 4.0)
    plus = 0.5 * (v + root)
    minus = 0.5 * (v - root)
    c = np.where(np.abs(plus - target) <= np.abs(minus - target), plus, minus)
    bad = np.abs(c - target) >= 0.5
    if bad.any():
        n = int(np.argmax(bad)) + 1
        raise ConstructionError(
            f"no root of z^2 - v z - 1 within 1/2 of {(-1) ** n:+d} at n={n} (v={complex(v[n - 1]):.6g})"
        )
    return c


def build_w(mu_seq, c_seq, sdot) -> np.ndarray:
    mu_seq = np.asarray(mu_seq, dtype=float)
    w = np.asarray(c_seq, dtype=complex) / (mu_seq * np.asarray(sdot, dtype=complex))
    bad = ~(w.real > 0)
    if bad.any():
        n = int(np.argmax(bad)) + 1
        raise ConstructionError(f"Re w_n <= 0 at n={n} (w={complex(w[n - 1]):.6g})")
    return w


@dataclass(frozen=True)
class AuxSpectrum:
    N: int
    mu_seq: np.ndarray = field(repr=False)
    c_seq: np.ndarray = field(repr=False)
    w_seq: np.ndarray = field(repr=False)
    s_dot: np.ndarray = field(repr=False)

    @property
    def M(self) -> int:
        return self.mu_seq.size

    @property
    def is_real(self) -> bool:
        return not np.any(self.w_seq.imag)

    @property
    def nodes(self) -> np.ndarray:
        return self.mu_seq[: self.N]

    def q_ratio(self, z) -> np.ndarray:
        """Q(z) = prod_{k<=N} (k^2 - z)/(mu_k^2 - z); w_n = Q(n^2)/pi where c_n = (-1)^n."""
        z = np.asarray(z, dtype=float)
        k = np.arange(1, self.N + 1, dtype=float)
        return np.prod((k**2 - z[..., None]) / (self.nodes**2 - z[..., None]), axis=-1)

    def residues(self) -> np.ndarray:
        """A_k with Q(z) - 1 = sum_k A_k / (mu_k^2 - z)."""
        a2 = self.nodes**2
        k2 = np.arange(1, self.N + 1, dtype=float) ** 2
        out = np.empty(self.N)
        for i in range(self.N):
            others = np.delete(a2, i)
            out[i] = np.prod(k2 - a2[i]) / np.prod(others - a2[i])
        return out


def build_aux_spectrum(t: TargetDeterminant, N: int, M: int) -> AuxSpectrum:
    mu = build_mu_sequence(N, M)
    _, sdot = eval_s_and_derivative(mu, mu, N)
    sdot = np.asarray(sdot)
    signs = np.where(np.arange(1, M + 1) % 2 == 0, 1.0, -1.0)
    if np.any(~((signs * sdot).real > 0)):
        raise ConstructionError("(-1)^n s'(mu_n) is not positive for every n")
    c = select_roots(t, mu)
    w = build_w(mu, c, sdot)
    return AuxSpectrum(N, mu, c, w, sdot)


@dataclass(frozen=True)
class KernelSet:
    """F (full symmetric array) and, once solved, the diagonal K(x, x).

    ``dG`` holds the y-derivative of the generating line G(y) on
    y = 0, h, ..., 2 pi; its value at 0 is the one-sided slope, which is the
    jump of d/ds F(s, t) across s = t.
    """

    x: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    truncation_M: int
    tail_mode: str
    tail_mass: float
    dG: np.ndarray = field(repr=False)
    K_diag: np.ndarray | None = field(default=None, repr=False)
    K_full: np.ndarray | None = field(default=None, repr=False)
    condition_stats: tuple = ()
    order: int = 4

    @property
    def n_points(self) -> int:
        return self.x.size

    @property
    def h(self) -> float:
        return math.pi / (self.n_points - 1)

    @property
    def kink(self) -> float:
        return self.dG[0]


def _tail_terms(aux: AuxSpectrum, n: np.ndarray) -> np.ndarray:
    return (2.0 / math.pi) * (aux.q_ratio(n.astype(float) ** 2) - 1.0)


def _tail_mass(aux: AuxSpectrum) -> float:
    if aux.N == 0:
        return 0.0
    n = np.arange(aux.M + 1, aux.M + 1 + _TAIL_TERMS)
    b = np.abs(_tail_terms(aux, n))
    # b_n decays like n^-2, so the remainder beyond the last term is about n_last * b_last
    return float(np.sum(b) + n[-1] * b[-1])


def _tail_function(aux: AuxSpectrum, y: np.ndarray):
    """Tail sum_{n>M} b_n cos(n y) and its y-derivative, b_n = 2 w_n - 2/pi.

    Valid when c_n = (-1)^n and mu_n = n for n > M.  Uses the partial
    fractions of Q and the closed form of sum cos(n y)/(n^2 - a^2).
    """
    if aux.N == 0:
        return np.zeros_like(y), np.zeros_like(y)
    A = aux.residues()
    n = np.arange(1, aux.M + 1, dtype=float)
    ny = np.multiply.outer(y, n)
    cos_ny = np.cos(ny)
    nsin_ny = np.sin(ny) * n
    val = np.zeros_like(y)
    der = np.zeros_like(y)
    for a, amp in zip(aux.nodes, A):
        inv = 1.0 / (n * n - a * a)
        sa = math.sin(math.pi * a)
        closed = 1.0 / (2 * a * a) - math.pi * np.cos(a * (math.pi - y)) / (2 * a * sa)
        dclosed = -math.pi * np.sin(a * (math.pi - y)) / (2 * sa)
        val -= amp * (closed - cos_ny @ inv)
        der -= amp * (dclosed + nsin_ny @ inv)
    val *= 2.0 / math.pi
    der *= 2.0 / math.pi
    # partial fractions cancel badly when the nodes cluster; compare one term
    direct = _tail_terms(aux, np.array([aux.M + 1]))[0]
    pf = (2.0 / math.pi) * np.sum(A / (aux.nodes**2 - (aux.M + 1.0) ** 2))
    if abs(pf - direct) > 1e-12 * abs(direct) + 1e-15:
        val, der = _tail_direct(aux, y)
    return val, der


def _tail_direct(aux: AuxSpectrum, y: np.ndarray):
    val = np.zeros_like(y)
    der = np.zeros_like(y)
    chunk = max(1, (1 << 22) // y.size)
    stop = aux.M + 1 + _TAIL_TERMS
    for start in range(aux.M + 1, stop, chunk):
        n = np.arange(start, min(start + chunk, stop)).astype(float)
        b = _tail_terms(aux, n)
        ny = np.multiply.outer(y, n)
        val += np.cos(ny) @ b
        der -= np.sin(ny) @ (b * n)
    # one-sided slope at y = 0+ from the n^-2 asymptotics of b_n
    der[0] = float(np.sum(np.arange(1, aux.N + 1) ** 2 - aux.nodes**2))
    return val, der


def assemble_F(aux: AuxSpectrum, n_points: int, tail: str = TAIL_ANALYTIC,
               tail_tol: float = TAIL_TOL, K_target: int = 0) -> KernelSet:
    """F(x, t) = sum_n [2 w_n sin(mu_n x) sin(mu_n t) - (2/pi) sin(n x) sin(n t)].

    F is stored through G(y) = sum_n [2 w_n cos(mu_n y) - (2/pi) cos(n y)]
    on y = 0, h, ..., 2 pi, since F(x, t) = (G(|x - t|) - G(x + t)) / 2.
    With ``tail='analytic'`` the terms n > M are summed in closed form, which
    requires v(n) = 0 for n > M (M >= number of sine coefficients).  With
    ``tail='truncate'`` they are dropped and the absolute tail mass must stay
    below ``tail_tol``.
    """
    if tail not in (TAIL_ANALYTIC, TAIL_TRUNCATE):
        raise ValidationError(f"tail mode must be {TAIL_ANALYTIC!r} or {TAIL_TRUNCATE!r}")
    if aux.M <= aux.N:
        raise ValidationError(f"truncation M={aux.M} must exceed N={aux.N}")
    if n_points < 9:
        raise ValidationError("need at least 9 grid points")
    h = math.pi / (n_points - 1)
    y = h * np.arange(2 * n_points - 1)
    n = np.arange(1, aux.M + 1, dtype=float)
    dtype = float if aux.is_real else complex
    w2 = 2.0 * (aux.w_seq.real if aux.is_real else aux.w_seq)
    free = np.full(aux.M, 2.0 / math.pi)
    my = np.multiply.outer(y, aux.mu_seq)
    ny = np.multiply.outer(y, n)
    G = np.cos(my) @ w2 - np.cos(ny) @ free
    dG = -(np.sin(my) @ (w2 * aux.mu_seq)) + np.sin(ny) @ (free * n)
    mass = _tail_mass(aux)
    if tail == TAIL_ANALYTIC:
        if aux.M < K_target:
            raise ValidationError(f"analytic tail needs M >= {K_target} (number of sine coefficients)")
        tv, td = _tail_function(aux, y)
        G = G + tv
        dG = dG + td
    elif mass > tail_tol:
        raise TailTooLargeError(f"series tail {mass:.3g} exceeds {tail_tol:.3g}; increase truncation_M")
    G = G.astype(dtype)
    dG = dG.astype(dtype)
    P = n_points
    F = 0.5 * (toeplitz(G[:P], G[:P]) - hankel(G[:P], G[P - 1:]))
    return KernelSet(np.linspace(0.0, math.pi, P), F, aux.M, tail, mass, dG)


def _kernel_slope(ks: KernelSet) -> np.ndarray:
    """V[j, i] = d/ds F(s, t_j) at s = x_i from the left, for j <= i."""
    P = ks.n_points
    d = ks.dG
    V = 0.5 * (toeplitz(d[:P], d[:P]) - hankel(d[:P], d[P - 1:]))
    idx = np.arange(P)
    V[idx, idx] = 0.5 * (-d[0] - d[2 * idx])
    return V


# one-sided derivative stencils (times h) on the last 2, 3, 4 samples
_END_STENCILS = {
    1: np.array([-1.0, 1.0]),
    2: np.array([1.0, -4.0, 3.0]) / 2.0,
    3: np.array([-2.0, 9.0, -18.0, 11.0]) / 6.0,
}


def _trap_weights(n: int, h: float) -> np.ndarray:
    d = np.full(n, h)
    d[0] = 0.5 * h
    return d


def _lu_nopivot(a: np.ndarray, block: int = _LU_BLOCK) -> np.ndarray:
    """In-place LU without pivoting; leading blocks of the factors factor the leading blocks of ``a``."""
    n = a.shape[0]
    for k in range(0, n, block):
        e = min(k + block, n)
        for j in range(k, e):
            piv = a[j, j]
            if piv == 0 or not np.isfinite(piv):
                raise IllConditionedError(f"zero pivot in nested Gelfand-Levitan system at index {j}")
            a[j + 1:, j] /= piv
            if j + 1 < e:
                a[j + 1:, j + 1:e] -= np.multiply.outer(a[j + 1:, j], a[j, j + 1:e])
        if e < n:
            a[k:e, e:] = solve_triangular(a[k:e, k:e], a[k:e, e:], lower=True,
                                          unit_diagonal=True, check_finite=False)
            a[e:, e:] -= a[e:, k:e] @ a[k:e, e:]
    return a


def _sample_indices(n: int, count: int) -> np.ndarray:
    return np.unique(np.rint(np.linspace(0, n - 1, count)).astype(int))


def _slope_column(ks: KernelSet, i: int) -> np.ndarray:
    d = ks.dG
    j = np.arange(i + 1)
    v = 0.5 * (d[i - j] - d[i + j])
    v[i] = 0.5 * (-d[0] - d[2 * i])
    return v


def gl_system(ks: KernelSet, i: int, order: int | None = None):
    """Dense discrete system (A, rhs) for the unknowns K(x_i, t_j), j <= i.

    Order 2 is the plain trapezoid rule.  Order 4 adds the Euler-Maclaurin
    corrections: the h^2/12 jump term where the kernel kinks at s = t, and
    the h^2/12 endpoint-slope term at s = x (the slope at s = 0 vanishes
    because F(0, t) = 0 and K(x, 0) = 0).
    """
    order = ks.order if order is None else order
    n = i + 1
    h = ks.h
    u = ks.F[:n, i]
    if i == 0:
        return np.eye(1, dtype=ks.F.dtype), -u.copy()
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    A = ks.F[:n, :n] * w[None, :]
    A[np.diag_indices(n)] += 1.0
    if order == 4:
        j = np.arange(1, i)
        A[j, j] += h * h / 12.0 * ks.kink
        r = min(i, 3)
        A[:, i - r:] -= (h / 12.0) * np.multiply.outer(u, _END_STENCILS[r])
        A[:, i] -= (h * h / 12.0) * _slope_column(ks, i)
    return A, -u.copy()


def _end_coefficients(h: float, r: int, eps: float, order: int):
    a = np.zeros(r + 1)
    a[-1] = 0.5 * h
    b = np.zeros(r + 1)
    # the kink term is complex for complex targets
    c = np.zeros(r + 1, dtype=np.result_type(eps, float))
    if order == 4:
        a += (h / 12.0) * _END_STENCILS[r]
        b[-1] = h * h / 12.0
        c[-1] = eps
    return a, b, c


def _tail_solve(Ut, y_rhs, z_rhs, a, b, c):
    """Last r+1 unknowns of the rank-three corrected leading-block system.

    With y = B^-1 u, z = B^-1 v, e = B^-1 e_i restricted to the tail, the
    tail kappa satisfies kappa = (a.kappa - 1) y + (b.kappa) z + (c.kappa) e.
    """
    m, r1, _ = Ut.shape
    Y = np.linalg.solve(Ut, y_rhs[..., None])[..., 0]
    Z = np.linalg.solve(Ut, z_rhs[..., None])[..., 0]
    last = np.zeros((m, r1, 1), dtype=Ut.dtype)
    last[:, -1, 0] = 1.0
    E = np.linalg.solve(Ut, last)[..., 0]
    S = np.eye(r1) - Y[:, :, None] * a[None, None, :] - Z[:, :, None] * b[None, None, :] - E[:, :, None] * c[None, None, :]
    kappa = np.linalg.solve(S, -Y[..., None])[..., 0]
    return kappa, Y, Z, E


def solve_gelfand_levitan(ks: KernelSet, full: bool = False, cond_max: float = COND_MAX,
                          order: int = 4) -> KernelSet:
    """Nystrom solution of K(x,t) + F(x,t) + int_0^x K(x,s) F(s,t) ds = 0 for all x_i at once.

    The interior parts of all systems share one matrix B = (1 + eps) I + F D,
    D = diag(h/2, h, ..., h), whose leading blocks are factored by a single
    unpivoted LU.  What differs per x_i (endpoint weight, endpoint slope
    term, missing jump term at t = x) touches only the last column and the
    last few stencil columns and is solved on a small tail system.
    """
    if order not in (2, 4):
        raise ValidationError("order must be 2 or 4")
    F = ks.F
    P = ks.n_points
    h = ks.h
    eps = h * h / 12.0 * ks.kink if order == 4 else 0.0
    B = F * _trap_weights(P, h)[None, :]
    B[np.diag_indices(P)] += 1.0 + eps
    samples = _sample_indices(P, _COND_SAMPLES)
    anorms = [float(np.abs(B[: i + 1, : i + 1]).sum(axis=0).max()) for i in samples]
    B = np.asfortranarray(B)
    _lu_nopivot(B)
    gecon = get_lapack_funcs("gecon", (B,))
    stats = []
    for i, an in zip(samples, anorms):
        rcond, info = gecon(B[: i + 1, : i + 1], an, norm="1")
        # the estimator's last digits depend on workspace alignment; keep it reproducible
        cond = math.inf if rcond == 0 else float(f"{1.0 / rcond:.6g}")
        stats.append((float(ks.x[i]), float(cond)))
    worst = max(c for _, c in stats)
    if not worst <= cond_max:
        raise IllConditionedError(f"Gelfand-Levitan system condition {worst:.3g} exceeds {cond_max:.3g}")
    Zu = solve_triangular(B, F, lower=True, unit_diagonal=True, check_finite=False)
    if order == 4:
        Zv = solve_triangular(B, _kernel_slope(ks), lower=True, unit_diagonal=True,
                              check_finite=False, overwrite_b=True)
    else:
        Zv = np.zeros_like(Zu)
    kdiag = np.empty(P, dtype=F.dtype)
    kdiag[0] = -F[0, 0]
    U = np.triu(B) if full else None
    K = np.zeros_like(F) if full else None
    if K is not None:
        K[0, 0] = kdiag[0]
    for r, idx in ((1, np.array([1])), (2, np.array([2])), (3, np.arange(3, P))):
        idx = idx[idx < P]
        if idx.size == 0:
            continue
        T = idx[:, None] + np.arange(-r, 1)[None, :]
        Ut = np.triu(B[T[:, :, None], T[:, None, :]])
        a, b, c = _end_coefficients(h, r, eps, order)
        kappa, *_ = _tail_solve(Ut, Zu[T, idx[:, None]], Zv[T, idx[:, None]], a, b, c)
        kdiag[idx] = kappa[:, -1]
        if K is not None:
            for row, i in enumerate(idx):
                kap = kappa[row]
                Ui = U[: i + 1, : i + 1]
                y = solve_triangular(Ui, Zu[: i + 1, i], check_finite=False)
                z = solve_triangular(Ui, Zv[: i + 1, i], check_finite=False)
                e = solve_triangular(Ui, np.eye(i + 1, dtype=F.dtype)[:, -1], check_finite=False)
                K[i, : i + 1] = (a @ kap - 1.0) * y + (b @ kap) * z + (c @ kap) * e
    if not np.all(np.isfinite(kdiag)):
        raise NumericalError("Gelfand-Levitan solve produced non-finite values")
    return replace(ks, K_diag=kdiag, K_full=K, condition_stats=tuple(stats), order=order)


@dataclass(frozen=True)
class ProbeResult:
    x: float
    g_norm: float
    sigma_min: float
    null_dim: int


def homogeneous_probe(ks: KernelSet, x_indices=None) -> list[ProbeResult]:
    """Look for nontrivial solutions of g + int_0^x F(., s) g(s) ds = 0.

    ``g_norm`` is the norm of the returned homogeneous solution, zero when the
    numerical null space is empty.
    """
    P = ks.n_points
    if x_indices is None:
        x_indices = (P // 4, P // 2, P - 1)
    out = []
    for i in x_indices:
        A, _ = gl_system(ks, int(i))
        sv = svdvals(A, check_finite=False)
        basis = null_space(A)
        g_norm = float(np.linalg.norm(basis[:, 0])) if basis.shape[1] else 0.0
        out.append(ProbeResult(float(ks.x[i]), g_norm, float(sv[-1]), int(basis.shape[1])))
    return out


def diagonal_derivative(f: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite-difference derivative of grid samples (one-sided at the ends)."""
    f = np.asarray(f)
    n = f.size
    if n < 5:
        raise ValidationError("need at least 5 samples to differentiate")
    d = np.empty_like(f)
    d[2:-2] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / 12.0
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / 12.0
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / 12.0
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / 12.0
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / 12.0
    return d / h


def extract_potential(ks: KernelSet) -> PotentialGrid:
    if ks.K_diag is None:
        raise ValidationError("kernel set has no solved K")
    return PotentialGrid(2.0 * diagonal_derivative(ks.K_diag, ks.h))


def check_grid(M: int) -> np.ndarray:
    """Quarter-integer offsets 0.25, 0.75, ..., M - 0.25 (clear of integers and half-integers)."""
    return 0.25 + 0.5 * np.arange(2 * M)


@dataclass(frozen=True)
class ReconstructionReport:
    q_hat: PotentialGrid = field(repr=False)
    residual_table: tuple = ()
    dirichlet_match: tuple = ()
    c_match: tuple = ()
    product_check: tuple = ()
    condition_stats: tuple = ()
    summary: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max((r for _, r in self._residual_abs()), default=0.0)

    def _residual_abs(self):
        return [(mu, abs(r)) for mu, r in self.residual_table]

    def to_json(self) -> dict:
        return {
            "summary": self.summary,
            "max_residual": self.max_residual,
            "residual_table": [[mu, r.real, r.imag] for mu, r in self.residual_table],
            "dirichlet_match": [[n, mu, err] for n, mu, err in self.dirichlet_match],
            "c_match": [[n, err] for n, err in self.c_match],
            "product_check": [[n, err] for n, err in self.product_check],
            "condition_stats": [[x, c] for x, c in self.condition_stats],
        }


def verify_reconstruction(t: TargetDeterminant, aux: AuxSpectrum, q_hat: PotentialGrid,
                          condition_stats=(), summary=None, n_dirichlet: int | None = None,
                          refine_tol: float = 1e-12) -> ReconstructionReport:
    """Compare the forward data of ``q_hat`` with the construction targets."""
    mus = check_grid(aux.M)
    ends = ode.endpoints(q_hat, mus)
    resid = (ends.c - ends.s_prime) - np.asarray(eval_v(t, mus))
    residual_table = tuple((float(m), complex(r)) for m, r in zip(mus, resid))

    count = min(aux.N + 8, aux.M) if n_dirichlet is None else min(n_dirichlet, aux.M)
    dirichlet = []
    for n in range(1, count + 1):
        target = aux.mu_seq[n - 1]
        pt = refine_zero(DIRICHLET, q_hat, 0, complex(target), refine_tol=refine_tol, multiplicity=1)
        dirichlet.append((n, float(pt.mu.real), float(abs(pt.mu - target))))
    at_nodes = ode.endpoints(q_hat, aux.mu_seq[:count])
    c_match = tuple((n, float(abs(at_nodes.c[n - 1] - aux.c_seq[n - 1]))) for n in range(1, count + 1))
    product = tuple((n, float(abs(at_nodes.c[n - 1] * at_nodes.s_prime[n - 1] - 1.0)))
                    for n in range(1, count + 1))
    return ReconstructionReport(q_hat, residual_table, tuple(dirichlet), c_match, product,
                                tuple(condition_stats), dict(summary or {}))


@dataclass(frozen=True)
class InverseResult:
    aux: AuxSpectrum
    kernels: KernelSet
    q_hat: PotentialGrid
    report: ReconstructionReport
    probes: tuple = ()


def run_inverse(t: TargetDeterminant, n_points: int = 2049, M: int = DEFAULT_M,
                tail: str = TAIL_ANALYTIC, tail_tol: float = TAIL_TOL, cond_max: float = COND_MAX,
                probe: bool = True, n_floor: int = N_FLOOR, n_max: int = N_MAX) -> InverseResult:
    """Full construction and forward verification for one target.

    The identically zero target skips the perturbation (N = 0), so the
    unperturbed spectrum and the zero potential are reproduced exactly.
    """
    N = select_N(t, n_floor, n_max)
    if M <= N:
        raise ValidationError(f"truncation_M={M} must exceed N={N}")
    aux = build_aux_spectrum(t, N, M)
    ks = assemble_F(aux, n_points, tail=tail, tail_tol=tail_tol, K_target=t.K if not t.is_zero else 0)
    ks = solve_gelfand_levitan(ks, cond_max=cond_max)
    q_hat = extract_potential(ks)
    probes = tuple(homogeneous_probe(ks)) if probe else ()
    summary = {
        "N": N,
        "M": M,
        "m": t.m,
        "grid_points": n_points,
        "tail_mode": tail,
        "tail_mass": ks.tail_mass,
        "min_re_w": float(np.min(aux.w_seq.real)),
        "max_abs_F": float(np.max(np.abs(ks.F))),
        "max_condition": max((c for _, c in ks.condition_stats), default=1.0),
        "q_hat_sup": q_hat.sup_norm(),
        "probe_max_g_norm": max((p.g_norm for p in probes), default=0.0),
        "probe_min_sigma": min((p.sigma_min for p in probes), default=math.nan),
    }
    report = verify_reconstruction(t, aux, q_hat, ks.condition_stats, summary)
    return InverseResult(aux, ks, q_hat, report, probes)
