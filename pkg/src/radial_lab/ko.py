"""Keller-Osserman type integral tests for a general nonlinearity f.

With F(t) = ∫_0^t f and G(s) = ∫_0^s F, the boundary behaviour in a ball is
governed by the convergence at infinity of

    plain:     ∫_1^∞ ds / G(s)^e        weighted:  ∫_1^∞ s ds / G(s)^e,

where e = p / (2p - q + 1). Convergence is decided from the tail exponent of
the integrand: the integrand is evaluated on a logarithmic grid up to a cutoff
and the slope of ln(integrand) against ln s over the last two decades is
compared with -1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import DivergentTail, GuardViolation, NonMonotoneInput
from .model import BallClassification, BallKind

DEFAULT_CUTOFF = 1e12
DEFAULT_MARGIN = 0.05
PER_DECADE = 20

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
_EPS = np.finfo(float).eps


# --- nonlinearities ---------------------------------------------------------------


class Nonlinearity:
    """Increasing f on [0, ∞) with f > 0 on (0, ∞)."""

    breakpoints: tuple[float, ...] = ()

    def __call__(self, t):
        raise NotImplementedError

    def extrapolated_beyond(self) -> float:
        return math.inf

    def describe(self) -> dict:
        raise NotImplementedError

    def check(self, grid=None) -> None:
        """Spot-check positivity and monotonicity on a grid."""
        grid = np.logspace(-6, 12, 400) if grid is None else np.asarray(grid, dtype=float)
        vals = np.asarray(self(grid), dtype=float)
        if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
            raise NonMonotoneInput("f must be finite and positive on (0, ∞)")
        if np.any(np.diff(vals) < -1e-12 * np.abs(vals[1:])):
            raise NonMonotoneInput("f must be nondecreasing")


@dataclass(frozen=True)
class PowerLaw(Nonlinearity):
    s: float

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("power-law exponent must be >= 0")

    def __call__(self, t):
        return np.power(np.asarray(t, dtype=float), self.s)

    def describe(self) -> dict:
        return {"kind": "PowerLaw", "s": self.s}


@dataclass(frozen=True, eq=False)
class Tabulated(Nonlinearity):
    """Sampled f, interpolated linearly in log-log and extended by the end slopes."""

    t: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        f = np.asarray(self.f, dtype=float)
        if t.ndim != 1 or t.shape != f.shape or len(t) < 2:
            raise ValueError("t and f must be 1-d arrays of equal length >= 2")
        if np.any(t < 0) or np.any(np.diff(t) <= 0):
            raise NonMonotoneInput("t must be strictly increasing and >= 0")
        if np.any(np.diff(f) < 0):
            raise NonMonotoneInput("f must be nondecreasing")
        pos = t > 0
        if np.any(f[pos] <= 0):
            raise NonMonotoneInput("f must be positive for t > 0")
        if np.count_nonzero(pos) < 2:
            raise ValueError("need at least two samples with t > 0")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "f", f)

    @property
    def breakpoints(self):
        return tuple(float(x) for x in self.t if x > 0)

    @classmethod
    def from_csv(cls, path) -> "Tabulated":
        """Two-column CSV with header ``t,f``."""
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or set(rows[0]) != {"t", "f"}:
            raise ValueError("expected a CSV with header 't,f'")
        return cls(np.array([float(r["t"]) for r in rows]), np.array([float(r["f"]) for r in rows]))

    def extrapolated_beyond(self) -> float:
        return float(self.t[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        pos = self.t > 0
        lt, lf = np.log(self.t[pos]), np.log(self.f[pos])
        out = np.empty_like(x)
        inside = (x > 0) & (x >= self.t[pos][0])
        with np.errstate(divide="ignore"):
            lx = np.log(np.where(x > 0, x, 1.0))
        # interior: log-log linear; beyond the ends: end-segment slopes
        y = np.interp(lx, lt, lf)
        hi = lx > lt[-1]
        k_hi = (lf[-1] - lf[-2]) / (lt[-1] - lt[-2])
        y = np.where(hi, lf[-1] + k_hi * (lx - lt[-1]), y)
        out[inside] = np.exp(y[inside])
        below = ~inside
        if np.any(below):
            if self.t[0] == 0:
                # linear between (0, f0) and the first positive sample
                out[below] = np.interp(x[below], self.t[:2], self.f[:2])
            else:
                k_lo = (lf[1] - lf[0]) / (lt[1] - lt[0])
                with np.errstate(divide="ignore"):
                    out[below] = np.where(x[below] > 0, np.exp(lf[0] + k_lo * (lx[below] - lt[0])), 0.0)
        return out

    def describe(self) -> dict:
        return {"kind": "Tabulated", "n": int(len(self.t)), "t_max": float(self.t[-1])}


@dataclass(frozen=True, eq=False)
class CallableNonlinearity(Nonlinearity):
    func: Callable
    name: str = "callable"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        try:
            out = np.asarray(self.func(t), dtype=float)
            if out.shape == t.shape:
                return out
        except (TypeError, ValueError):
            pass
        return np.vectorize(lambda x: float(self.func(x)), otypes=[float])(t)

    def describe(self) -> dict:
        return {"kind": "Callable", "name": self.name}


def as_nonlinearity(f) -> Nonlinearity:
    if isinstance(f, Nonlinearity):
        return f
    if isinstance(f, (int, float)):
        return PowerLaw(float(f))
    if callable(f):
        return CallableNonlinearity(f)
    raise TypeError(f"cannot interpret {f!r} as a nonlinearity")


# --- cumulative integrals --------------------------------------------------------------


def _gl(fn, a: float, b: float) -> tuple[float, float]:
    """(∫_a^b fn, ∫_a^b (b - x) fn) by 20-point Gauss-Legendre in ln x."""
    la, lb = math.log(a), math.log(b)
    half = 0.5 * (lb - la)
    x = np.exp(0.5 * (la + lb) + half * _GL_X)
    g = fn(x) * x * _GL_W * half
    return float(np.sum(g)), float(np.sum((b - x) * g))


def _converged(I, I0, J, J0, b, rtol):
    # J inherits roughly eps * b * |I| of rounding from the b - x weights
    ok_i = np.abs(I - I0) <= rtol * np.abs(I) + 1e-300
    ok_j = np.abs(J - J0) <= rtol * np.abs(J) + 64 * _EPS * b * np.abs(I) + 1e-300
    return ok_i & ok_j


def _adaptive(fn, a: float, b: float, rtol: float = 1e-12, depth: int = 0) -> tuple[float, float]:
    I0, J0 = _gl(fn, a, b)
    m = math.sqrt(a * b)
    I1, J1 = _gl(fn, a, m)
    I2, J2 = _gl(fn, m, b)
    I, J = I1 + I2, J1 + J2 + (b - m) * I1
    if depth >= 12 or _converged(I, I0, J, J0, b, rtol):
        return I, J
    Ia, Ja = _adaptive(fn, a, m, rtol, depth + 1)
    Ib, Jb = _adaptive(fn, m, b, rtol, depth + 1)
    return Ia + Ib, Ja + Jb + (b - m) * Ia


def _gl_many(fn, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``_gl`` over many intervals."""
    la, lb = np.log(a), np.log(b)
    half = 0.5 * (lb - la)
    x = np.exp(0.5 * (la + lb)[:, None] + half[:, None] * _GL_X[None, :])
    g = np.asarray(fn(x.ravel()), dtype=float).reshape(x.shape) * x * _GL_W * half[:, None]
    return g.sum(axis=1), ((b[:, None] - x) * g).sum(axis=1)


def _intervals(fn, a: np.ndarray, b: np.ndarray, rtol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """(∫ f, ∫ (b - x) f) over each [a_i, b_i], adaptive where needed."""
    I0, J0 = _gl_many(fn, a, b)
    m = np.sqrt(a * b)
    I1, J1 = _gl_many(fn, a, m)
    I2, J2 = _gl_many(fn, m, b)
    I = I1 + I2
    J = J1 + J2 + (b - m) * I1
    for i in np.flatnonzero(~_converged(I, I0, J, J0, b, rtol)):
        I[i], J[i] = _adaptive(fn, float(a[i]), float(b[i]), rtol)
    return I, J


def _origin(fn, t0: float) -> tuple[float, float]:
    # ∫_0^t0 f and ∫_0^t0 F = ∫_0^t0 (t0 - x) f(x) dx
    F0 = quad(lambda x: float(fn(np.array([x]))[0]), 0.0, t0, epsabs=0.0, epsrel=1e-13, limit=200)[0]
    G0 = quad(lambda x: (t0 - x) * float(fn(np.array([x]))[0]), 0.0, t0, epsabs=0.0, epsrel=1e-13, limit=200)[0]
    return F0, G0


def _antiderivatives(fn, t_grid, breakpoints=()):
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0 or np.any(t_grid <= 0) or np.any(np.diff(t_grid) <= 0):
        raise NonMonotoneInput("t_grid must be positive and strictly increasing")
    knots = np.array([b for b in breakpoints if t_grid[0] < b < t_grid[-1]])
    nodes = np.union1d(t_grid, knots)
    # keep every sub-interval within a ratio of 10^(1/20)
    ratio = 10 ** (1 / PER_DECADE)
    pts = [nodes[0]]
    for b in nodes[1:]:
        a = pts[-1]
        k = max(1, math.ceil(math.log(b / a) / math.log(ratio)))
        pts.extend(a * (b / a) ** (np.arange(1, k + 1) / k))
        pts[-1] = b
    pts = np.array(pts)
    I, J = _intervals(fn, pts[:-1], pts[1:])
    F = np.empty(len(pts))
    G = np.empty(len(pts))
    F[0], G[0] = _origin(fn, pts[0])
    F[1:] = F[0] + np.cumsum(I)
    G[1:] = G[0] + np.cumsum(F[:-1] * np.diff(pts) + J)
    idx = np.searchsorted(pts, t_grid)
    return F[idx], G[idx]


def cumulative(f, t_grid) -> tuple[np.ndarray, np.ndarray]:
    """F(t) = ∫_0^t f and G(t) = ∫_0^t F on an increasing positive grid."""
    f = as_nonlinearity(f)
    return _antiderivatives(f, t_grid, f.breakpoints)


# --- verdicts ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceVerdict:
    verdict: str  # "Convergent" | "Divergent" | "Inconclusive"
    tail_exponent_estimate: float
    confidence_band: tuple[float, float]
    cutoff: float = DEFAULT_CUTOFF
    margin: float = DEFAULT_MARGIN
    extrapolated: bool = False

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["confidence_band"] = list(self.confidence_band)
        return d


def _decide(slope: float, margin: float) -> str:
    if slope < -1 - margin:
        return "Convergent"
    if slope > -1 + margin:
        return "Divergent"
    return "Inconclusive"


def _tail_verdict(s_grid, log_integrand, cutoff, margin, extrapolated) -> ConvergenceVerdict:
    ls = np.log(s_grid)
    win = ls >= ls[-1] - 2 * math.log(10) - 1e-12
    x, y = ls[win], log_integrand[win]
    slope = float(np.polyfit(x, y, 1)[0])
    local = np.diff(y) / np.diff(x)
    band = (float(local.min()), float(local.max()))
    return ConvergenceVerdict(_decide(slope, margin), slope, band, cutoff, margin, extrapolated)


def _exponent(p: float, q: float) -> float:
    guard = 2 * p - q + 1
    if guard <= 0:
        raise GuardViolation(f"2p - q + 1 = {guard:g} <= 0")
    return p / guard


def _grid(cutoff: float) -> np.ndarray:
    n = int(round(math.log10(cutoff) * PER_DECADE)) + 1
    return np.logspace(0.0, math.log10(cutoff), n)


@dataclass(frozen=True)
class KOVerdicts:
    plain: ConvergenceVerdict
    weighted: ConvergenceVerdict
    exponent: float
    nonlinearity: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "plain": self.plain.as_dict(),
            "weighted": self.weighted.as_dict(),
            "exponent": self.exponent,
            "nonlinearity": self.nonlinearity,
        }


def ko_verdicts(f, p: float, q: float, *, cutoff: float = DEFAULT_CUTOFF, margin: float = DEFAULT_MARGIN) -> KOVerdicts:
    f = as_nonlinearity(f)
    e = _exponent(p, q)
    s = _grid(cutoff)
    _, G = cumulative(f, s)
    lg = -e * np.log(G)
    extra = cutoff > f.extrapolated_beyond()
    return KOVerdicts(
        plain=_tail_verdict(s, lg, cutoff, margin, extra),
        weighted=_tail_verdict(s, lg + np.log(s), cutoff, margin, extra),
        exponent=e,
        nonlinearity=f.describe(),
    )


def theorem1_classify(f, p: float, q: float, **kw) -> BallClassification:
    """Boundary behaviour in a ball from the two integral tests."""
    v = ko_verdicts(f, p, q, **kw)
    plain, weighted = v.plain.verdict, v.weighted.verdict
    if "Inconclusive" in (plain, weighted):
        return BallClassification(
            BallKind.INCONCLUSIVE,
            f"plain={plain} ({v.plain.tail_exponent_estimate:.4g}), "
            f"weighted={weighted} ({v.weighted.tail_exponent_estimate:.4g})",
        )
    if plain == "Divergent":
        if weighted == "Convergent":
            # cannot happen for positive increasing G: s/G^e >= 1/G^e on [1, ∞)
            return BallClassification(BallKind.INCONCLUSIVE, "weighted convergent but plain divergent")
        return BallClassification(BallKind.ALL_BOUNDED)
    if weighted == "Convergent":
        return BallClassification(BallKind.U_BOUNDED_V_BLOWS_UP)
    return BallClassification(BallKind.BOTH_BLOW_UP)


def classical_ko_verdict(f, *, cutoff: float = DEFAULT_CUTOFF, margin: float = DEFAULT_MARGIN) -> ConvergenceVerdict:
    """The single-equation test ∫_1^∞ ds / sqrt(F(s))."""
    f = as_nonlinearity(f)
    s = _grid(cutoff)
    F, _ = cumulative(f, s)
    return _tail_verdict(s, -0.5 * np.log(F), cutoff, margin, cutoff > f.extrapolated_beyond())


# --- sqrt(f) form ----------------------------------------------------------------------


@dataclass(frozen=True)
class SqrtfReport:
    f_form: ConvergenceVerdict
    sqrtf_form: ConvergenceVerdict
    agree: bool
    inequality_min_ratio: float
    inequality_holds: bool

    def as_dict(self) -> dict:
        return {
            "f_form": self.f_form.as_dict(),
            "sqrtf_form": self.sqrtf_form.as_dict(),
            "agree": self.agree,
            "inequality_min_ratio": self.inequality_min_ratio,
            "inequality_holds": self.inequality_holds,
        }


def sqrt_cumulative(f, t_grid) -> np.ndarray:
    """H(t) = ∫_0^t sqrt(f)."""
    f = as_nonlinearity(f)
    H, _ = _antiderivatives(lambda x: np.sqrt(f(x)), t_grid, f.breakpoints)
    return H


def sqrtf_equivalence(f, p: float, q: float, *, cutoff: float = DEFAULT_CUTOFF, margin: float = DEFAULT_MARGIN) -> SqrtfReport:
    """Compare ∫ ds / H(s)^(2e) with ∫ ds / G(s)^e, and check G(2s) >= H(s)^2.

    The pointwise inequality (∫_0^{2s} F)^e >= (∫_0^s sqrt f)^(2e) is checked
    on its bases since e > 0; the reported ratio is min G(2s) / H(s)^2.
    """
    f = as_nonlinearity(f)
    e = _exponent(p, q)
    s = _grid(cutoff)
    _, G = cumulative(f, s)
    H = sqrt_cumulative(f, s)
    extra = cutoff > f.extrapolated_beyond()
    v_f = _tail_verdict(s, -e * np.log(G), cutoff, margin, extra)
    v_h = _tail_verdict(s, -2 * e * np.log(H), cutoff, margin, extra)
    sg = np.logspace(-3, math.log10(cutoff / 2), 200)
    _, G2 = cumulative(f, 2 * sg)
    Hs = sqrt_cumulative(f, sg)
    ratio = float(np.min(G2 / Hs**2))
    return SqrtfReport(v_f, v_h, v_f.verdict == v_h.verdict, ratio, ratio >= 1.0 - 1e-12)


# --- tail function ---------------------------------------------------------------------


def gamma_tail(f, p: float, q: float, t, *, cutoff: float = DEFAULT_CUTOFF, margin: float = DEFAULT_MARGIN):
    """Γ(t) = ∫_t^∞ ds / G(s)^e, for scalar or array t > 0.

    Quadrature runs to max(cutoff, 1e4 t); the remainder is closed with the
    power tail fitted at the cutoff.
    """
    f = as_nonlinearity(f)
    e = _exponent(p, q)
    v = ko_verdicts(f, p, q, cutoff=cutoff, margin=margin)
    if v.plain.verdict != "Convergent":
        raise DivergentTail(f"plain integral is {v.plain.verdict}; Γ is infinite")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr <= 0):
        raise ValueError("t must be positive")
    top = max(cutoff, 1e4 * float(t_arr.max()))
    # composite GL nodes in ln s covering [min t, top], with every t as a breakpoint
    edges = np.union1d(np.logspace(math.log10(t_arr.min()), math.log10(top), int(math.log10(top / t_arr.min()) * PER_DECADE) + 2), t_arr)
    edges = edges[edges <= top]
    le = np.log(edges)
    half = 0.5 * np.diff(le)
    mid = 0.5 * (le[1:] + le[:-1])
    nodes = np.exp(mid[:, None] + half[:, None] * _GL_X[None, :])
    _, Gn = cumulative(f, nodes.ravel())
    g = Gn.reshape(nodes.shape) ** (-e) * nodes
    pieces = np.sum(g * _GL_W[None, :], axis=1) * half
    # tail beyond the last node from the local exponent there
    ls_top = np.log(np.array([top / 100, top]))
    _, Gt = cumulative(f, np.exp(ls_top))
    slope = float(np.diff(-e * np.log(Gt))[0] / np.diff(ls_top)[0])
    g_top = float(Gt[-1] ** (-e))
    tail = g_top * top / (-slope - 1) if slope < -1 else math.inf
    suffix = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]]) + tail
    out = suffix[np.searchsorted(edges, t_arr)]
    return float(out[0]) if np.ndim(t) == 0 else out
