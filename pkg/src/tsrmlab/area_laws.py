"""Closed-form and high-precision Brownian-area laws.

Everything here is an oracle: pure functions of their inputs, no Monte
Carlo.  The module provides

* the Airy function Ai (and Bi, needed for Wronskian checks) by two
  independent routes: a power series around 0 and a Taylor-stepped ODE
  table seeded by asymptotic expansions at |x| = 20.5;
* the first negative zero a1' of Ai' and the small-ball rate constant
  kappa = 2|a1'|^3 / 27, always computed, never hard-coded;
* the exact law of the area U swept by a Brownian motion started at 1 and
  stopped at its first zero:  P(U <= a) = int_{a^(-1/3)}^inf e^(-2y^3/9) dy / Z
  with Z = int_0^inf e^(-2y^3/9) dy, plus density, quantile, a tabulated
  sampler, and the two-fold convolution P(U1 + U2 <= x);
* a finite-difference residual check of the PDE (d^2/dx^2 - 2x d/dA) F = 0
  satisfied by F(x, A) = P(area from height x <= A);
* least-squares fitting of small-ball decay models
  log p = log c + e * log(eps) - kappa / eps^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "AiryConstants",
    "AreaLawTable",
    "SmallBallFit",
    "SmallBallModel",
    "absorption_area_cdf",
    "absorption_area_pdf",
    "absorption_area_quantile",
    "airy_ai",
    "airy_ai_prime",
    "airy_bi",
    "airy_bi_prime",
    "airy_constants",
    "build_area_table",
    "convolution_sum_tail",
    "first_airy_prime_zero",
    "height_area_cdf",
    "kappa",
    "normalization_constant",
    "pde_residual",
    "small_ball_fit",
]

AIRY_DOMAIN = 20.0
_SERIES_RADIUS = 5.0
_ODE_SEED = 20.5
_ODE_STEP = 0.01


class DomainError(ValueError):
    """Argument outside an operation's documented domain."""


# ---------------------------------------------------------------------------
# Airy functions
# ---------------------------------------------------------------------------

# Ai(0), Ai'(0), Bi(0), Bi'(0) from Gamma-function identities.
_AI0 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
_AIP0 = -(3.0 ** (-1.0 / 3.0)) / math.gamma(1.0 / 3.0)
_BI0 = math.sqrt(3.0) * _AI0
_BIP0 = math.sqrt(3.0) * (-_AIP0)


def _airy_series(x: float, y0: float, yp0: float) -> tuple[float, float]:
    """Power-series solution of y'' = x y with given data at 0."""
    # y = sum a_n x^n, a_{n+3} = a_n / ((n+2)(n+3)); three interleaved lanes
    val = 0.0
    der = 0.0
    a = [y0, yp0, 0.0]
    xn = [1.0, x, x * x]  # x^n for the current n of each lane
    n = [0, 1, 2]
    x3 = x * x * x
    for _ in range(200):
        done = True
        for lane in range(3):
            an, xnn, nn = a[lane], xn[lane], n[lane]
            term = an * xnn
            val += term
            der += an * nn * (xnn / x if x != 0.0 else (1.0 if nn == 1 else 0.0))
            if abs(term) > 1e-19 * max(1.0, abs(val)):
                done = False
            a[lane] = an / ((nn + 2.0) * (nn + 3.0))
            xn[lane] = xnn * x3
            n[lane] = nn + 3
        if done:
            break
    return val, der


def _asymptotic_u_v(nterms: int) -> tuple[np.ndarray, np.ndarray]:
    u = np.empty(nterms)
    v = np.empty(nterms)
    u[0] = v[0] = 1.0
    for k in range(1, nterms):
        u[k] = u[k - 1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / (216.0 * k * (2 * k - 1))
        v[k] = u[k] * (6 * k + 1) / (1 - 6 * k)
    return u, v


def _airy_asymptotic(x: float) -> tuple[float, float, float, float]:
    """(Ai, Ai', Bi, Bi') for |x| >= ~8 from the standard expansions."""
    u, v = _asymptotic_u_v(22)
    t = abs(x)
    zeta = (2.0 / 3.0) * t**1.5
    pre = 1.0 / (math.sqrt(math.pi) * t**0.25)
    pre_d = t**0.25 / math.sqrt(math.pi)
    k = np.arange(len(u))
    if x > 0:
        s_u = float(np.sum((-1.0) ** k * u / zeta**k))
        s_v = float(np.sum((-1.0) ** k * v / zeta**k))
        s_u_pos = float(np.sum(u / zeta**k))
        s_v_pos = float(np.sum(v / zeta**k))
        ai = 0.5 * pre * math.exp(-zeta) * s_u
        aip = -0.5 * pre_d * math.exp(-zeta) * s_v
        bi = pre * math.exp(zeta) * s_u_pos
        bip = pre_d * math.exp(zeta) * s_v_pos
        return ai, aip, bi, bip
    ke = np.arange(0, len(u), 2)
    ko = np.arange(1, len(u), 2)
    c_even_u = float(np.sum((-1.0) ** (ke // 2) * u[ke] / zeta**ke))
    c_odd_u = float(np.sum((-1.0) ** (ko // 2) * u[ko] / zeta**ko))
    c_even_v = float(np.sum((-1.0) ** (ke // 2) * v[ke] / zeta**ke))
    c_odd_v = float(np.sum((-1.0) ** (ko // 2) * v[ko] / zeta**ko))
    cw = math.cos(zeta - 0.25 * math.pi)
    sw = math.sin(zeta - 0.25 * math.pi)
    ai = pre * (cw * c_even_u + sw * c_odd_u)
    aip = pre_d * (sw * c_even_v - cw * c_odd_v)
    bi = pre * (-sw * c_even_u + cw * c_odd_u)
    bip = pre_d * (cw * c_even_v + sw * c_odd_v)
    return ai, aip, bi, bip


def _taylor_step(x0: float, y: float, yp: float, h: float, order: int = 14) -> tuple[float, float]:
    """Advance y'' = x y by h with a local Taylor expansion at x0."""
    a = np.zeros(order + 2)
    a[0], a[1] = y, yp
    for n in range(order):
        # a_{n+2} = (x0 a_n + a_{n-1}) / ((n+1)(n+2))
        prev = a[n - 1] if n >= 1 else 0.0
        a[n + 2] = (x0 * a[n] + prev) / ((n + 1.0) * (n + 2.0))
    val = 0.0
    der = 0.0
    for n in range(order + 1, -1, -1):  # Horner
        val = val * h + a[n]
        if n >= 1:
            der = der * h + n * a[n]
    return val, der


class _AiryTable:
    """Taylor-stepped solution table on [-ODE_SEED, ODE_SEED].

    Ai is integrated in its decaying direction (from +20.5 downward) and Bi
    in its growing direction (from -20.5 upward); both seeded from the
    asymptotic expansions, which are far below 1e-16 relative error there.
    """

    def __init__(self):
        n = int(round(2 * _ODE_SEED / _ODE_STEP)) + 1
        self.xs = np.linspace(-_ODE_SEED, _ODE_SEED, n)
        self.ai = np.empty(n)
        self.aip = np.empty(n)
        self.bi = np.empty(n)
        self.bip = np.empty(n)
        ai, aip, _, _ = _airy_asymptotic(_ODE_SEED)
        y, yp = ai, aip
        self.ai[n - 1], self.aip[n - 1] = y, yp
        for i in range(n - 1, 0, -1):
            y, yp = _taylor_step(self.xs[i], y, yp, -_ODE_STEP)
            self.ai[i - 1], self.aip[i - 1] = y, yp
        _, _, bi, bip = _airy_asymptotic(-_ODE_SEED)
        y, yp = bi, bip
        self.bi[0], self.bip[0] = y, yp
        for i in range(n - 1):
            y, yp = _taylor_step(self.xs[i], y, yp, _ODE_STEP)
            self.bi[i + 1], self.bip[i + 1] = y, yp

    def eval(self, x: float, which: str) -> tuple[float, float]:
        i = int(round((x + _ODE_SEED) / _ODE_STEP))
        i = min(max(i, 0), len(self.xs) - 1)
        x0 = self.xs[i]
        if which == "ai":
            y, yp = self.ai[i], self.aip[i]
        else:
            y, yp = self.bi[i], self.bip[i]
        return _taylor_step(x0, y, yp, x - x0)


@lru_cache(maxsize=1)
def _table() -> _AiryTable:
    return _AiryTable()


def _check_domain(x: float) -> float:
    x = float(x)
    if not -AIRY_DOMAIN <= x <= AIRY_DOMAIN:
        raise DomainError(f"Airy evaluation restricted to [-20, 20], got {x}")
    return x


def _airy_pair(x: float, which: str) -> tuple[float, float]:
    if abs(x) <= _SERIES_RADIUS:
        if which == "ai":
            return _airy_series(x, _AI0, _AIP0)
        return _airy_series(x, _BI0, _BIP0)
    return _table().eval(x, which)


def airy_ai(x: float) -> float:
    return _airy_pair(_check_domain(x), "ai")[0]


def airy_ai_prime(x: float) -> float:
    return _airy_pair(_check_domain(x), "ai")[1]


def airy_bi(x: float) -> float:
    return _airy_pair(_check_domain(x), "bi")[0]


def airy_bi_prime(x: float) -> float:
    return _airy_pair(_check_domain(x), "bi")[1]


def airy_ai_series(x: float) -> tuple[float, float]:
    """Series route on its own, exposed for cross-validation tests."""
    return _airy_series(_check_domain(x), _AI0, _AIP0)


def airy_ai_ode(x: float) -> tuple[float, float]:
    """ODE-table route on its own, exposed for cross-validation tests."""
    return _table().eval(_check_domain(x), "ai")


# ---------------------------------------------------------------------------
# kappa = 2 |a1'|^3 / 27
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AiryConstants:
    a1_prime: float
    kappa: float


@lru_cache(maxsize=8)
def first_airy_prime_zero(bracket: tuple[float, float] = (-1.1, -1.0)) -> float:
    lo, hi = bracket
    flo, fhi = airy_ai_prime(lo), airy_ai_prime(hi)
    if flo * fhi >= 0:
        raise DomainError(f"bracket {bracket} does not straddle a zero of Ai'")
    return float(optimize.brentq(airy_ai_prime, lo, hi, xtol=1e-14, rtol=8.9e-16))


def kappa() -> float:
    return 2.0 * abs(first_airy_prime_zero()) ** 3 / 27.0


def airy_constants() -> AiryConstants:
    a1p = first_airy_prime_zero()
    return AiryConstants(a1_prime=a1p, kappa=2.0 * abs(a1p) ** 3 / 27.0)


# ---------------------------------------------------------------------------
# Law of U = area under BM started at 1, absorbed at 0
# ---------------------------------------------------------------------------


def _weight(y: float) -> float:
    return math.exp(-2.0 * y**3 / 9.0)


@lru_cache(maxsize=1)
def normalization_constant() -> float:
    """Z = int_0^inf e^(-2y^3/9) dy, by adaptive quadrature.

    Equals Gamma(4/3) (9/2)^(1/3); the test suite checks both routes agree.
    """
    val, err = integrate.quad(_weight, 0.0, np.inf, epsabs=1e-14, epsrel=1e-13)
    if err > 1e-10:
        raise RuntimeError(f"normalization quadrature failed to converge: err={err}")
    return val


def _upper_weight_integral(u: float) -> float:
    val, _ = integrate.quad(_weight, u, np.inf, epsabs=1e-300, epsrel=1e-12)
    return val


def absorption_area_cdf(a) -> float | np.ndarray:
    """P(U <= a) for the absorption area U from start height 1."""
    if np.ndim(a) > 0:
        return np.array([absorption_area_cdf(float(ai)) for ai in np.asarray(a)])
    a = float(a)
    if a <= 0.0:
        raise DomainError(f"absorption area must be positive, got {a}")
    return _upper_weight_integral(a ** (-1.0 / 3.0)) / normalization_constant()


def absorption_area_pdf(a) -> float | np.ndarray:
    if np.ndim(a) > 0:
        return np.array([absorption_area_pdf(float(ai)) for ai in np.asarray(a)])
    a = float(a)
    if a <= 0.0:
        raise DomainError(f"absorption area must be positive, got {a}")
    return (a ** (-4.0 / 3.0) / 3.0) * math.exp(-2.0 / (9.0 * a)) / normalization_constant()


def absorption_area_quantile(p) -> float | np.ndarray:
    """Inverse of absorption_area_cdf, to |cdf(q) - p| <= 1e-9."""
    if np.ndim(p) > 0:
        return np.array([absorption_area_quantile(float(pi)) for pi in np.asarray(p)])
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile level must lie in (0,1), got {p}")

    def f(loga: float) -> float:
        return absorption_area_cdf(math.exp(loga)) - p

    lo, hi = -1.0, 1.0
    while f(lo) > 0.0:
        lo -= 4.0
        if lo < -60:
            raise RuntimeError("quantile bracket expansion failed (low side)")
    while f(hi) < 0.0:
        hi += 4.0
        if hi > 90:
            raise RuntimeError("quantile bracket expansion failed (high side)")
    root = optimize.brentq(f, lo, hi, xtol=1e-13, rtol=8.9e-16)
    return math.exp(root)


def height_area_cdf(height: float, budget: float) -> float:
    """F(x, A) = P(area from start height x <= A); scaling of the height-1 law."""
    if height < 0.0 or budget <= 0.0:
        raise DomainError("height must be >= 0 and budget > 0")
    if height == 0.0:
        return 1.0
    return float(absorption_area_cdf(budget / height**3))


@dataclass(frozen=True)
class AreaLawTable:
    """Tabulated CDF of U on a log grid, with an inverse-transform sampler.

    The grid is dense enough that linear interpolation of log a against the
    CDF keeps inverse-transform sampling within ~1e-4 of the exact law in
    Kolmogorov distance; both tails are handled by closed-form asymptotics.
    """

    grid: np.ndarray       # area values (log-spaced)
    cdf: np.ndarray        # P(U <= grid)
    pdf: np.ndarray
    normalization: float

    def quantile_interp(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        lo, hi = self.cdf[0], self.cdf[-1]
        out = np.exp(np.interp(p, self.cdf, np.log(self.grid)))
        # left tail: P(U<=a) ~ Z^-1 e^(-2/(9a)) (3 a^(2/3)/2) => invert the exponent
        left = p < lo
        if np.any(left):
            out[left] = 2.0 / (9.0 * (-np.log(np.maximum(p[left], 1e-300) * self.normalization)))
        # right tail: 1 - P(U<=a) ~ a^(-1/3)/Z
        right = p > hi
        if np.any(right):
            out[right] = ((1.0 - p[right]) * self.normalization) ** -3.0
        return out

    def sample(self, uniforms: np.ndarray) -> np.ndarray:
        return self.quantile_interp(uniforms)


@lru_cache(maxsize=2)
def build_area_table(n: int = 4097, lo: float = 1e-3, hi: float = 1e9) -> AreaLawTable:
    grid = np.exp(np.linspace(math.log(lo), math.log(hi), n))
    cdf = np.array([absorption_area_cdf(a) for a in grid])
    pdf = np.array([absorption_area_pdf(a) for a in grid])
    return AreaLawTable(grid=grid, cdf=cdf, pdf=pdf, normalization=normalization_constant())


# ---------------------------------------------------------------------------
# Two-fold convolution P(U1 + U2 <= x)
# ---------------------------------------------------------------------------

CONVOLUTION_FLOOR = 0.002


def convolution_sum_tail(x: float) -> float:
    """P(U1 + U2 <= x) for iid absorption areas, by adaptive quadrature.

    The density factor e^(-2/(9a)) vanishes to all orders at a = 0, so the
    integrand is smooth but sharply peaked at a = x/2; the peak location is
    passed to the quadrature as a break point.
    """
    x = float(x)
    if x <= 0.0:
        raise DomainError(f"x must be positive, got {x}")
    if x < CONVOLUTION_FLOOR:
        raise DomainError(
            f"x={x} is below the quadrature validity floor {CONVOLUTION_FLOOR}"
        )
    z = normalization_constant()

    def integrand(a: float) -> float:
        if a <= 0.0 or a >= x:
            return 0.0
        dens = (a ** (-4.0 / 3.0) / 3.0) * math.exp(-2.0 / (9.0 * a)) / z
        return dens * _upper_weight_integral((x - a) ** (-1.0 / 3.0)) / z

    val, err = integrate.quad(
        integrand, 0.0, x, points=[0.5 * x], epsabs=1e-300, epsrel=1e-10, limit=200
    )
    if val > 0 and err / val > 1e-6:
        raise RuntimeError(f"convolution quadrature relative error {err / val:.2e} too large")
    return min(val, 1.0)


# ---------------------------------------------------------------------------
# PDE residual of F(x, A)
# ---------------------------------------------------------------------------


def pde_residual(x_grid: np.ndarray, a_grid: np.ndarray, f_table: np.ndarray) -> float:
    """Max |d2F/dx2 - 2x dF/dA| over the interior of a tabulated F(x, A).

    Centered second differences in x and centered first differences in A;
    the residual of the exact law decays like the grid spacing squared.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    a_grid = np.asarray(a_grid, dtype=float)
    f_table = np.asarray(f_table, dtype=float)
    if len(x_grid) < 5 or len(a_grid) < 5:
        raise DomainError("pde_residual needs at least 5 grid points per axis")
    if f_table.shape != (len(x_grid), len(a_grid)):
        raise DomainError("F table shape does not match the grids")
    hx = x_grid[1] - x_grid[0]
    ha = a_grid[1] - a_grid[0]
    fxx = (f_table[2:, 1:-1] - 2.0 * f_table[1:-1, 1:-1] + f_table[:-2, 1:-1]) / hx**2
    fa = (f_table[1:-1, 2:] - f_table[1:-1, :-2]) / (2.0 * ha)
    resid = fxx - 2.0 * x_grid[1:-1, None] * fa
    return float(np.max(np.abs(resid)))


# ---------------------------------------------------------------------------
# Small-ball decay fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmallBallModel:
    """log p(eps) = log(free_constant) + prefactor_exponent*log(eps) - kappa/eps^2."""

    kind: str                      # "motion" or "bridge"
    prefactor_exponent: int        # 1 for motion, 0 for bridge
    kappa: float | None = None     # reference rate, if known
    free_constant: float | None = None

    def log_p(self, eps: np.ndarray) -> np.ndarray:
        if self.kappa is None or self.free_constant is None:
            raise ValueError("model parameters not set")
        eps = np.asarray(eps, dtype=float)
        return (
            math.log(self.free_constant)
            + self.prefactor_exponent * np.log(eps)
            - self.kappa / eps**2
        )


@dataclass(frozen=True)
class SmallBallFit:
    kappa_hat: float
    kappa_ci: tuple[float, float]
    log_constant: float
    residual_rms: float


def small_ball_fit(
    eps: np.ndarray,
    log_p: np.ndarray,
    model: SmallBallModel,
    stderr: np.ndarray | None = None,
) -> SmallBallFit:
    """Weighted LS fit of the small-ball model; returns kappa_hat with CI."""
    eps = np.asarray(eps, dtype=float)
    log_p = np.asarray(log_p, dtype=float)
    if len(eps) < 4:
        raise DomainError("small_ball_fit needs at least 4 points")
    if eps.max() / eps.min() < 2.0:
        raise DomainError("eps values must span at least a factor of 2")
    y = log_p - model.prefactor_exponent * np.log(eps)
    design = np.column_stack([np.ones_like(eps), -1.0 / eps**2])
    w = np.ones_like(eps) if stderr is None else 1.0 / np.asarray(stderr, dtype=float)
    dw = design * w[:, None]
    yw = y * w
    coef, *_ = np.linalg.lstsq(dw, yw, rcond=None)
    resid = yw - dw @ coef
    dof = max(len(eps) - 2, 1)
    s2 = float(resid @ resid) / dof
    try:
        cov = s2 * np.linalg.inv(dw.T @ dw)
        half = 1.96 * math.sqrt(max(cov[1, 1], 0.0))
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("degenerate design matrix in small_ball_fit") from exc
    k = float(coef[1])
    return SmallBallFit(
        kappa_hat=k,
        kappa_ci=(k - half, k + half),
        log_constant=float(coef[0]),
        residual_rms=math.sqrt(s2),
    )
