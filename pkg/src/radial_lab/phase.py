"""The cooperative (Y, Z, W) system obtained from radial solutions through

    X = r u'/u,  Y = r v'/v,  Z = r^(a+1) v^p / u',  W = r^(b+1) v^q u'^s / v',  t = ln r,

together with flow integration, the order-preservation check, the a-priori
box, ω-limit detection and the divergence of the field over the box.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DegenerateState, HypothesisViolated, PhaseDivergence
from .model import SystemParams, div_h, divergence_condition, equilibria
from .shooter import RadialState, RadialTrajectory, phase_quotients

DIVERGENCE_BOUND = 1e8


@dataclass(frozen=True)
class PhasePoint:
    X: float | None
    Y: float
    Z: float
    W: float
    t: float


@dataclass(frozen=True)
class LimitVerdict:
    kind: str  # "ConvergedTo" | "Undecided"
    equilibrium: str | None = None  # "xi1" | "xi2"
    point: tuple[float, float, float] | None = None
    distance: float | None = None

    def as_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class PhaseTrajectory:
    params: SystemParams
    t: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    W: np.ndarray
    X: np.ndarray | None = None
    limit: LimitVerdict | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.t)

    def points(self) -> np.ndarray:
        return np.column_stack([self.Y, self.Z, self.W])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["t", "X", "Y", "Z", "W"])
            for i in range(len(self.t)):
                x = "" if self.X is None else f"{self.X[i]:.17g}"
                wr.writerow([f"{self.t[i]:.17g}", x, f"{self.Y[i]:.17g}", f"{self.Z[i]:.17g}", f"{self.W[i]:.17g}"])


# --- change of variables ---------------------------------------------------------------


def to_phase(params: SystemParams, state: RadialState) -> PhasePoint:
    if state.w <= 0 or state.z <= 0:
        raise DegenerateState("u' and v' must be positive (r = 0 is excluded)")
    if state.u <= 0 or state.v <= 0:
        raise DegenerateState("u and v must be positive")
    X, Y, Z, W = phase_quotients(
        params, math.log(state.r), math.log(state.u), math.log(state.v), math.log(state.w), math.log(state.z)
    )
    return PhasePoint(float(X), float(Y), float(Z), float(W), math.log(state.r))


def phase_image(traj: RadialTrajectory) -> PhaseTrajectory:
    """Phase coordinates of every sample of a radial trajectory (X included)."""
    X, Y, Z, W = traj.quotients()
    return PhaseTrajectory(traj.params, traj.t.copy(), Y, Z, W, X=X)


# --- vector field ----------------------------------------------------------------------


def vector_field(params: SystemParams, point):
    Y, Z, W = point
    N, a, b, p, q, s = params.N, params.a, params.b, params.p, params.q, params.s
    return (
        Y * (W - (N - 2) - Y),
        Z * (N + a + p * Y - Z),
        W * (s * Z + N - s * N + s + b + q * Y - W),
    )


def jacobian(params: SystemParams, point) -> np.ndarray:
    Y, Z, W = point
    N, a, b, p, q, s = params.N, params.a, params.b, params.p, params.q, params.s
    return np.array(
        [
            [W - (N - 2) - 2 * Y, 0.0, Y],
            [p * Z, N + a + p * Y - 2 * Z, 0.0],
            [q * W, s * W, s * Z + N - s * N + s + b + q * Y - 2 * W],
        ]
    )


def _field(params: SystemParams):
    def f(t, y):
        return np.array(vector_field(params, y))

    return f


def integrate_phase(
    params: SystemParams,
    xi0,
    t_span=(0.0, 40.0),
    *,
    rel_tol: float = 1e-12,
    abs_tol: float = 1e-12,
    n_samples: int = 2001,
    tail_fraction: float = 0.25,
    tol: float = 1e-6,
) -> PhaseTrajectory:
    xi0 = np.asarray(xi0, dtype=float)
    if np.any(xi0 < 0):
        raise ValueError("initial point must be nonnegative")

    def escape(t, y):
        return DIVERGENCE_BOUND - np.max(np.abs(y))

    escape.terminal = True
    sol = solve_ivp(
        _field(params), t_span, xi0, method="DOP853", rtol=rel_tol, atol=abs_tol,
        events=escape, dense_output=True,
    )
    if sol.status == 1:
        raise PhaseDivergence(f"coordinates exceeded {DIVERGENCE_BOUND:g} at t={sol.t[-1]:.6g}")
    if sol.status == -1:
        raise PhaseDivergence(sol.message)
    grid = np.linspace(t_span[0], t_span[1], n_samples)
    Y, Z, W = sol.sol(grid)
    traj = PhaseTrajectory(params, grid, Y, Z, W)
    return PhaseTrajectory(params, grid, Y, Z, W, limit=omega_limit(traj, tail_fraction, tol))


# --- comparison principle --------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonReport:
    max_violation: float
    t_worst: float
    passed: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


COMPARISON_TOL = 1e-9


def comparison_check(
    params: SystemParams,
    low,
    high,
    t_span=(0.0, 20.0),
    *,
    n_samples: int = 2001,
    rel_tol: float = 1e-13,
    abs_tol: float = 1e-14,
) -> ComparisonReport:
    """Integrate ordered data side by side and measure the worst order inversion.

    Both solutions advance in one stacked system so they share the step
    sequence; independent runs would add uncorrelated truncation errors of
    the size of the tolerance we are trying to resolve. Both solutions merge
    at ξ2, so late in the run the gap is as small as the truncation error;
    the tolerances sit well below the 1e-9 order check.
    """
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)
    if np.any(low > high):
        raise ValueError("low must be <= high componentwise")
    f = _field(params)

    def g(t, y):
        return np.concatenate([f(t, y[:3]), f(t, y[3:])])

    grid = np.linspace(t_span[0], t_span[1], n_samples)
    sol = solve_ivp(g, t_span, np.concatenate([low, high]), method="DOP853",
                    rtol=rel_tol, atol=abs_tol, t_eval=grid)
    if sol.status != 0:
        raise PhaseDivergence(sol.message)
    gap = np.maximum(0.0, sol.y[:3] - sol.y[3:])
    worst = gap.max(axis=0)
    i = int(np.argmax(worst))
    v = float(worst[i])
    return ComparisonReport(max_violation=v, t_worst=float(sol.t[i]), passed=v <= COMPARISON_TOL)


def box_bounds(params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Corners ξ1 and ξ2 of the box L = [ξ1, ξ2]."""
    xi1, xi2 = equilibria(params)
    return np.array(xi1), np.array(xi2)


def random_ordered_pair(params: SystemParams, rng: np.random.Generator):
    lo, hi = box_bounds(params)
    low = lo + rng.random(3) * (hi - lo)
    high = low + rng.random(3) * (hi - low)
    return low, high


# --- box and limit ----------------------------------------------------------------------


@dataclass(frozen=True)
class BoxViolation:
    t: float
    component: str
    excess: float


def box_check(traj: PhaseTrajectory, tol: float = 0.0) -> list[BoxViolation]:
    """Samples leaving [0, A] x [N+a, B] x [N+s(a+1)+b, K], with their excess."""
    lo, hi = box_bounds(traj.params)
    out = []
    for name, col, l, h in zip("YZW", (traj.Y, traj.Z, traj.W), lo, hi):
        ex = np.maximum(l - col, col - h)
        for i in np.flatnonzero(ex > tol):
            out.append(BoxViolation(float(traj.t[i]), name, float(ex[i])))
    return sorted(out, key=lambda v: (v.t, v.component))


MIN_TAIL_SPAN = 5.0


def omega_limit(traj: PhaseTrajectory, tail_fraction: float = 0.25, tol: float = 1e-6) -> LimitVerdict:
    """Equilibrium the tail of the trajectory sits at, if any.

    The tail is the last ``tail_fraction`` of the time range and must cover at
    least five time units. Every tail sample has to lie within relative
    distance ``tol`` of the same equilibrium; anything else (slow approach,
    oscillation, a possible cycle) is reported as Undecided.
    """
    t = traj.t
    if len(t) < 2:
        return LimitVerdict("Undecided")
    t_start = t[-1] - tail_fraction * (t[-1] - t[0])
    if t[-1] - t_start < MIN_TAIL_SPAN:
        return LimitVerdict("Undecided")
    tail = traj.points()[t >= t_start]
    xi1, xi2 = equilibria(traj.params)
    best = None
    for name, xi in (("xi1", np.array(xi1)), ("xi2", np.array(xi2))):
        d = float(np.max(np.abs(tail - xi) / np.maximum(1.0, np.abs(xi))))
        if best is None or d < best[1]:
            best = (name, d, tuple(float(x) for x in xi))
    name, d, xi = best
    if d <= tol:
        return LimitVerdict("ConvergedTo", name, xi, d)
    return LimitVerdict("Undecided", distance=d)


# --- divergence over the box ------------------------------------------------------------


@dataclass(frozen=True)
class DivergenceSample:
    min: float
    max: float
    corners: dict
    condition_holds: bool
    interior_min: float | None = None
    interior_max: float | None = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def divergence_sample(
    params: SystemParams, n_points: int = 0, rng: np.random.Generator | None = None
) -> DivergenceSample:
    """Exact extrema of the (affine) divergence over L, taken at its 8 corners.

    ``n_points`` extra random interior points are evaluated as a sanity check
    that the corner extrema really bound the box.
    """
    if params.kappa <= 0:
        raise HypothesisViolated("the box L needs ps + q < 1")
    lo, hi = box_bounds(params)
    corners = {}
    for pick in product((0, 1), repeat=3):
        c = tuple(float((lo, hi)[k][i]) for i, k in enumerate(pick))
        corners["".join("lh"[k] for k in pick)] = float(div_h(params, *c))
    vals = list(corners.values())
    holds = divergence_condition(params)
    i_min = i_max = None
    if n_points:
        rng = rng or np.random.default_rng(0)
        pts = lo + rng.random((n_points, 3)) * (hi - lo)
        dv = div_h(params, pts[:, 0], pts[:, 1], pts[:, 2])
        i_min, i_max = float(dv.min()), float(dv.max())
    return DivergenceSample(min(vals), max(vals), corners, holds, i_min, i_max)
