"""Closed-form analysis of the weighted radial system

    Δu = |x|^a v^p,    Δv = |x|^b v^q |∇u|^s.

Everything here is computable without integrating anything: parameter
validation, the boundary-behaviour thresholds, the global-existence
predicate, the asymptotic exponents and amplitudes, the two equilibria of
the (Y, Z, W) phase system and the linear stability data at the attracting
one.

Amplitudes such as c_v = 880**(-10/3) underflow quickly, so they are carried
as natural logarithms (``log_c_v``) and exposed through ``exp`` properties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import (
    DimensionTooSmall,
    GuardViolation,
    HypothesisViolated,
    NonPositiveExponent,
    ValidationError,
)

# Threshold comparisons treat |x - y| below this as equality, so that
# parameters sitting exactly on a boundary (ps + q = 1, s = 2(1 + (1-q)/p))
# fall into the closed clause despite binary rounding.
THRESHOLD_TOL = 1e-12


def _leq(x: float, y: float) -> bool:
    return x <= y + THRESHOLD_TOL * max(1.0, abs(x), abs(y))


@dataclass(frozen=True)
class SystemParams:
    """Dimension, weights and exponents of the system; f(t) = t**s."""

    N: int
    a: float
    b: float
    p: float
    q: float
    s: float = 1.0

    def __post_init__(self) -> None:
        if int(self.N) != self.N:
            raise DimensionTooSmall(f"N must be an integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        for name in ("a", "b", "p", "q", "s"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValidationError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.N < 2:
            raise DimensionTooSmall(f"N must be >= 2, got {self.N}")
        if self.p <= 0:
            raise NonPositiveExponent(f"p must be > 0, got {self.p}")
        if self.q <= 0:
            raise NonPositiveExponent(f"q must be > 0, got {self.q}")
        if self.a < 0:
            raise NonPositiveExponent(f"a must be >= 0, got {self.a}")
        if self.b < 0:
            raise NonPositiveExponent(f"b must be >= 0, got {self.b}")
        if self.s < 1:
            raise NonPositiveExponent(f"s must be >= 1, got {self.s}")

    @property
    def kappa(self) -> float:
        """1 - ps - q; positive exactly in the global, polynomially growing regime."""
        return 1.0 - self.p * self.s - self.q

    @property
    def guard(self) -> float:
        return 2.0 * self.p - self.q + 1.0

    @property
    def ko_exponent(self) -> float:
        """p / (2p - q + 1), the power applied to G in the integral tests."""
        if self.guard <= 0:
            raise GuardViolation(f"2p - q + 1 = {self.guard:g} <= 0")
        return self.p / self.guard

    @property
    def ell(self) -> float:
        """N + s(a+1) + b: the W-coordinate of the trivial equilibrium."""
        return self.N + self.s * (self.a + 1.0) + self.b

    def as_dict(self) -> dict[str, float]:
        return {"N": self.N, "a": self.a, "b": self.b, "p": self.p, "q": self.q, "s": self.s}


def validate(N, a, b, p, q, s=1.0, *, check_guard: bool = True) -> SystemParams:
    """Build a SystemParams, raising a precise ValidationError subclass on failure.

    With ``check_guard`` the Keller-Osserman guard 2p - q + 1 > 0 is enforced
    as well; the closed-form classifier does not need it and accepts
    ``check_guard=False`` parameters, reporting them as out of theory.
    """
    params = SystemParams(N, a, b, p, q, s)
    if check_guard and params.guard <= 0:
        raise GuardViolation(f"2p - q + 1 = {params.guard:g} <= 0")
    return params


def _require_growth_regime(params: SystemParams) -> None:
    if params.p >= 1 or _leq(params.kappa, 0.0):
        raise HypothesisViolated(
            f"requires p < 1 and ps + q < 1 (p={params.p:g}, ps+q={params.p * params.s + params.q:g})"
        )


# --- boundary behaviour in a ball -------------------------------------------------


class BallKind(str, Enum):
    ALL_BOUNDED = "AllBounded"
    U_BOUNDED_V_BLOWS_UP = "UBoundedVBlowsUp"
    BOTH_BLOW_UP = "BothBlowUp"
    OUT_OF_THEORY = "OutOfTheory"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class BallClassification:
    kind: BallKind
    reason: str | None = None

    @property
    def label(self) -> str:
        return self.kind.value

    def __eq__(self, other):
        if isinstance(other, BallKind):
            return self.kind is other
        if isinstance(other, BallClassification):
            return self.kind is other.kind and self.reason == other.reason
        return NotImplemented

    def __hash__(self):
        return hash((self.kind, self.reason))


def classify_ball(params: SystemParams) -> BallClassification:
    """Closed-form boundary behaviour of positive radial solutions in a ball."""
    p, q, s = params.p, params.q, params.s
    if params.guard <= 0:
        return BallClassification(BallKind.OUT_OF_THEORY, "guard: 2p - q + 1 <= 0")
    if _leq(p * s + q - 1.0, 0.0):
        return BallClassification(BallKind.ALL_BOUNDED)
    c = (1.0 - q) / p
    upper = 2.0 * (1.0 + c)
    if s > upper and not _leq(s, upper):
        return BallClassification(BallKind.U_BOUNDED_V_BLOWS_UP)
    if c < s and _leq(s, upper):
        return BallClassification(BallKind.BOTH_BLOW_UP)
    return BallClassification(BallKind.OUT_OF_THEORY, "no clause applies")


def global_existence(params: SystemParams) -> bool:
    """Positive radial solutions exist in all of R^N iff ps + q - 1 <= 0."""
    return _leq(params.p * params.s + params.q - 1.0, 0.0)


# --- asymptotics -----------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticProfile:
    """Growth exponents and amplitudes at infinity.

    ``A, B, K, D`` are the limits of Y, Z, W, X along radial solutions. The
    u-exponent and u-amplitude come in two variants: ``*_derived`` (forced by
    the equilibrium relations and the exact power solution) and
    ``*_published`` (an alternative closed form that the numerics reject, kept
    for discrepancy reporting).
    """

    A: float
    B: float
    K: float
    D: float
    rho_u_derived: float
    rho_u_published: float
    log_c_v: float
    log_c_u_derived: float
    log_c_u_published: float

    @property
    def rho_v(self) -> float:
        return self.A

    @property
    def c_v(self) -> float:
        return math.exp(self.log_c_v)

    @property
    def c_u_derived(self) -> float:
        return math.exp(self.log_c_u_derived)

    @property
    def c_u_published(self) -> float:
        return math.exp(self.log_c_u_published)

    def as_dict(self) -> dict[str, float]:
        return {
            "A": self.A,
            "B": self.B,
            "K": self.K,
            "D": self.D,
            "rho_v": self.rho_v,
            "rho_u_derived": self.rho_u_derived,
            "rho_u_published": self.rho_u_published,
            "log_c_v": self.log_c_v,
            "log_c_u_derived": self.log_c_u_derived,
            "log_c_u_published": self.log_c_u_published,
        }


def published_constants(params: SystemParams) -> tuple[float, float, float, float]:
    """A, B, K, D in the shape 2 + (b + 2q + s(1 + a + 2p)) / (1 - ps - q)."""
    N, a, b, p, q, s = params.N, params.a, params.b, params.p, params.q, params.s
    frac = (b + 2 * q + s * (1 + a + 2 * p)) / params.kappa
    A = 2 + frac
    B = N + a + p * (2 + frac)
    K = N + frac
    D = 2 + a + p * (2 + frac)
    return A, B, K, D


def asymptotic_profile(params: SystemParams) -> AsymptoticProfile:
    _require_growth_regime(params)
    N, a, b, p, q, s = params.N, params.a, params.b, params.p, params.q, params.s
    kappa = params.kappa
    A = ((a + 1) * s + b + 2) / kappa
    B = N + a + p * A
    K = A + N - 2
    D = a + 2 + p * A
    rho_u_published = ((a + 2) * kappa + p * s * (a + 1) + b * p + 2 * q) / kappa
    log_c_v = (math.log(A) + s * math.log(B) + math.log(K)) / (p * s + q - 1)
    return AsymptoticProfile(
        A=A,
        B=B,
        K=K,
        D=D,
        rho_u_derived=D,
        rho_u_published=rho_u_published,
        log_c_v=log_c_v,
        log_c_u_derived=p * log_c_v - math.log(D * B),
        log_c_u_published=p * log_c_v - math.log(D * K),
    )


@dataclass(frozen=True)
class PowerSolution:
    """u = c_u r**rho_u, v = c_v r**rho_v solving the radial system exactly."""

    log_c_u: float
    rho_u: float
    log_c_v: float
    rho_v: float

    @property
    def c_u(self) -> float:
        return math.exp(self.log_c_u)

    @property
    def c_v(self) -> float:
        return math.exp(self.log_c_v)

    def log_state(self, r):
        """(ln u, ln v, ln u', ln v') at radius r."""
        lr = np.log(r)
        return (
            self.log_c_u + self.rho_u * lr,
            self.log_c_v + self.rho_v * lr,
            self.log_c_u + math.log(self.rho_u) + (self.rho_u - 1) * lr,
            self.log_c_v + math.log(self.rho_v) + (self.rho_v - 1) * lr,
        )

    def __iter__(self):
        return iter((self.c_u, self.rho_u, self.c_v, self.rho_v))


def exact_power_solution(params: SystemParams) -> PowerSolution:
    prof = asymptotic_profile(params)
    return PowerSolution(prof.log_c_u_derived, prof.D, prof.log_c_v, prof.A)


def power_residual(params: SystemParams, sol: PowerSolution, r) -> tuple[np.ndarray, np.ndarray]:
    """Relative residuals of both radial equations for a pure-power pair.

    Uses Δ(c r^m) = m (m + N - 2) c r^(m-2) and compares logarithms, so the
    result is immune to under/overflow of the amplitudes.
    """
    N, a, b, p, q, s = params.N, params.a, params.b, params.p, params.q, params.s
    lr = np.log(np.asarray(r, dtype=float))
    mu, mv = sol.rho_u, sol.rho_v
    lap_u = sol.log_c_u + math.log(mu * (mu + N - 2)) + (mu - 2) * lr
    rhs_u = a * lr + p * (sol.log_c_v + mv * lr)
    lap_v = sol.log_c_v + math.log(mv * (mv + N - 2)) + (mv - 2) * lr
    log_du = sol.log_c_u + math.log(mu) + (mu - 1) * lr
    rhs_v = b * lr + q * (sol.log_c_v + mv * lr) + s * log_du
    return np.abs(np.expm1(lap_u - rhs_u)), np.abs(np.expm1(lap_v - rhs_v))


# --- phase-system equilibria and stability ----------------------------------------


class Equilibrium(NamedTuple):
    Y: float
    Z: float
    W: float


def equilibria(params: SystemParams) -> tuple[Equilibrium, Equilibrium]:
    """The trivial equilibrium ξ1 and the attracting interior one ξ2."""
    if abs(params.kappa) <= THRESHOLD_TOL:
        raise HypothesisViolated("ξ2 is undefined when ps + q = 1")
    N, a = params.N, params.a
    xi1 = Equilibrium(0.0, float(N + a), params.ell)
    A = ((a + 1) * params.s + params.b + 2) / params.kappa
    xi2 = Equilibrium(A, N + a + params.p * A, A + N - 2)
    return xi1, xi2


def cubic_roots(c2: float, c1: float, c0: float, tol: float = 1e-12) -> np.ndarray:
    """Roots of λ³ + c2 λ² + c1 λ + c0.

    A closed-form real root is polished by Newton iteration, deflated out, and
    the remaining quadratic is solved with the cancellation-free formula.
    """

    def P(x):
        return ((x + c2) * x + c1) * x + c0

    def dP(x):
        return (3 * x + 2 * c2) * x + c1

    shift = c2 / 3.0
    pp = c1 - c2 * c2 / 3.0
    qq = 2.0 * c2**3 / 27.0 - c2 * c1 / 3.0 + c0
    disc = (qq / 2.0) ** 2 + (pp / 3.0) ** 3
    if disc >= 0:
        sq = math.sqrt(disc)
        t = np.cbrt(-qq / 2.0 + sq) + np.cbrt(-qq / 2.0 - sq)
    else:
        m = 2.0 * math.sqrt(-pp / 3.0)
        arg = 3.0 * qq / (pp * m)
        t = m * math.cos(math.acos(max(-1.0, min(1.0, arg))) / 3.0)
    x = float(t - shift)
    for _ in range(60):
        d = dP(x)
        if d == 0:
            break
        step = P(x) / d
        x -= step
        if abs(step) <= tol * max(1.0, abs(x)):
            break

    bq = c2 + x
    cq = c1 + x * bq
    dq = bq * bq - 4.0 * cq
    if dq >= 0:
        sq = math.sqrt(dq)
        qv = -0.5 * (bq + math.copysign(sq, bq))
        pair = [qv, cq / qv] if qv != 0 else [0.0, -bq]
    else:
        im = 0.5 * math.sqrt(-dq)
        pair = [complex(-0.5 * bq, im), complex(-0.5 * bq, -im)]

    roots = []
    for z in [x, *pair]:
        z = complex(z)
        for _ in range(8):
            d = dP(z)
            if d == 0:
                break
            step = P(z) / d
            z -= step
            if abs(step) <= tol * max(1.0, abs(z)):
                break
        roots.append(z)
    return np.array(sorted(roots, key=lambda z: (z.real, z.imag)), dtype=complex)


def poly_scale(coeffs, lam) -> float:
    """Σ |c_k| |λ|^k, the natural scale for a relative residual |P(λ)|."""
    return float(sum(abs(c) * abs(lam) ** k for k, c in enumerate(reversed(coeffs))))


@dataclass(frozen=True)
class StabilityReport:
    jacobian: np.ndarray
    alpha: float
    beta: float
    gamma: float
    kappa: float
    eigenvalues: np.ndarray
    asymptotically_stable: bool

    @property
    def char_poly(self) -> tuple[float, float, float, float]:
        """Monic coefficients (1, α, β, (1 - ps - q) γ)."""
        return (1.0, self.alpha, self.beta, self.kappa * self.gamma)

    @property
    def certificate(self) -> float:
        """αβ - (1 - ps - q) γ; positive means the complex pair lies in Re < 0."""
        return self.alpha * self.beta - self.kappa * self.gamma

    def as_dict(self) -> dict:
        return {
            "jacobian": self.jacobian.tolist(),
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "constant_term": self.kappa * self.gamma,
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "asymptotically_stable": self.asymptotically_stable,
            "certificate": self.certificate,
        }


def linearization(params: SystemParams, point) -> np.ndarray:
    """Jacobian of the phase vector field, evaluated at an equilibrium."""
    Y, Z, W = point
    p, q, s = params.p, params.q, params.s
    return np.array(
        [
            [-Y, 0.0, Y],
            [p * Z, -Z, 0.0],
            [q * W, s * W, -W],
        ]
    )


def stability_report(params: SystemParams) -> StabilityReport:
    _require_growth_regime(params)
    _, (Y, Z, W) = equilibria(params)
    q = params.q
    alpha = Y + Z + W
    beta = Y * Z + Z * W + (1 - q) * Y * W
    gamma = Y * Z * W
    eig = cubic_roots(alpha, beta, params.kappa * gamma)
    return StabilityReport(
        jacobian=linearization(params, (Y, Z, W)),
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        kappa=params.kappa,
        eigenvalues=eig,
        asymptotically_stable=bool(np.all(eig.real < 0)),
    )


# --- divergence of the phase field ------------------------------------------------


def div_h(params: SystemParams, Y, Z, W):
    """Divergence of the phase vector field; affine in (Y, Z, W)."""
    N, a, b, p, q, s = params.N, params.a, params.b, params.p, params.q, params.s
    return -W + (s - 2) * Z + (-2 + p + q) * Y + 2 + a + N * (1 - s) + s + b


def divergence_lhs(params: SystemParams) -> float:
    if params.kappa <= 0:
        raise HypothesisViolated("divergence condition needs ps + q < 1")
    p, s, a, b = params.p, params.s, params.a, params.b
    return p * (s - 2) * (s + a * s + b + 2) / params.kappa


def divergence_condition(params: SystemParams) -> bool:
    """p(s-2)(s+as+b+2)/(1-ps-q) <= 2(N+a-1)."""
    return divergence_lhs(params) <= 2 * (params.N + params.a - 1)
