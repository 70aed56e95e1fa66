"""Radial initial-value problem: integration from the origin, blow-up
detection, empirical boundary classification, growth fits and scaling.

Everything is integrated against t = ln r through the four dimensionless
quotients

    X = r u'/u,  Y = r v'/v,  Z = r^(a+1) v^p / u',  W = r^(b+1) v^q u'^s / v'.

The solver state is (ln X, ln Y, ln Z, ln W, ln v): the quotients obey an
autonomous polynomial system, ln v grows with rate Y, and ln u', ln v', ln u
follow algebraically from the definitions. The quotients stay O(1) along
global solutions, so their accuracy does not degrade as ln v reaches the
hundreds, and a run to r = 1e12 costs about as much as one to r = 10.
Finite-radius blow-up shows up as Y -> infinity.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    DegenerateScaling,
    NonPositiveInitialData,
    NotABlowUp,
    RadialLabError,
    WindowTooShort,
)
from .model import BallClassification, BallKind, PowerSolution, SystemParams


class MonotonicityViolation(RadialLabError, AssertionError):
    """u, v, u' or v' decreased along a trajectory beyond tolerance."""


CRITICAL_TOL = 1e-9
STEP_SUBDIVISION = 4
ROUNDING = 4 * np.finfo(float).eps


@dataclass(frozen=True)
class Controls:
    r_max: float = 1e6
    # v_cap is disabled by default: runs are in log variables and global
    # solutions legitimately pass v = 1e40 well before r = 1e6.
    v_cap: float = math.inf
    # Blow-up is declared once the growth index Y = r v'/v exceeds this.
    # Global solutions keep Y below the finite limit A.
    growth_cap: float = 1e10
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    r0: float = 1e-6
    samples_per_decade: int = 100
    # "auto": DOP853, except LSODA when ps + q = 1. There v grows like
    # exp(c r^k), Y grows without bound and the log system turns stiff.
    method: str = "auto"


@dataclass(frozen=True)
class RadialState:
    r: float
    u: float
    w: float
    v: float
    z: float


@dataclass(frozen=True)
class Outcome:
    kind: str  # "GlobalUpTo" | "BlowUp" | "Aborted"
    r_max: float | None = None
    R: float | None = None
    R_uncertainty: float | None = None
    reason: str | None = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def phase_quotients(params: SystemParams, t, lu, lv, lw, lz):
    """X, Y, Z, W from log-state, evaluated without forming u, v, u', v'."""
    a, b, p, q, s = params.a, params.b, params.p, params.q, params.s
    X = np.exp(t + lw - lu)
    Y = np.exp(t + lz - lv)
    Z = np.exp((a + 1) * t + p * lv - lw)
    W = np.exp((b + 1) * t + q * lv + s * lw - lz)
    return X, Y, Z, W


def phase_derivatives(params: SystemParams, X, Y, Z, W):
    """d/dt of (X, Y, Z, W) along radial solutions."""
    N, a, b, p, q, s = params.N, params.a, params.b, params.p, params.q, params.s
    dX = X * (Z - (N - 2) - X)
    dY = Y * (W - (N - 2) - Y)
    dZ = Z * (N + a + p * Y - Z)
    dW = W * (s * Z + N - s * N + s + b + q * Y - W)
    return dX, dY, dZ, dW


@dataclass(frozen=True)
class RadialTrajectory:
    """Sampled radial solution, stored as logarithms against t = ln r."""

    params: SystemParams
    initial: tuple[float, float]
    t: np.ndarray
    log_u: np.ndarray
    log_v: np.ndarray
    log_w: np.ndarray
    log_z: np.ndarray
    outcome: Outcome
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def r(self) -> np.ndarray:
        return np.exp(self.t)

    @property
    def u(self) -> np.ndarray:
        return np.exp(self.log_u)

    @property
    def v(self) -> np.ndarray:
        return np.exp(self.log_v)

    @property
    def w(self) -> np.ndarray:
        return np.exp(self.log_w)

    @property
    def z(self) -> np.ndarray:
        return np.exp(self.log_z)

    def state(self, i: int) -> RadialState:
        return RadialState(
            r=math.exp(self.t[i]),
            u=math.exp(self.log_u[i]),
            w=math.exp(self.log_w[i]),
            v=math.exp(self.log_v[i]),
            z=math.exp(self.log_z[i]),
        )

    def quotients(self):
        return phase_quotients(self.params, self.t, self.log_u, self.log_v, self.log_w, self.log_z)

    def at(self, r) -> tuple[np.ndarray, ...]:
        """(ln u, ln v, ln u', ln v') interpolated linearly in t."""
        tt = np.log(r)
        return tuple(np.interp(tt, self.t, y) for y in (self.log_u, self.log_v, self.log_w, self.log_z))

    def to_csv(self, path) -> None:
        with np.errstate(over="ignore"):
            cols = (self.r, self.u, self.w, self.v, self.z)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["r", "u", "du", "v", "dv"])
            for row in zip(*cols):
                wr.writerow([f"{x:.17g}" for x in row])


# --- startup -------------------------------------------------------------------------


def init_state(params: SystemParams, u0: float, v0: float, r0: float = 1e-6) -> RadialState:
    """Leading-order series of the regular solution near the origin.

    u'(r0) = r0^(a+1) v0^p / (N+a),   v'(r0) = r0^(b+1) v0^q u'(r0)^s / (N + s(a+1) + b).
    """
    if not (u0 > 0 and v0 > 0):
        raise NonPositiveInitialData(f"u0 and v0 must be > 0, got ({u0}, {v0})")
    if not r0 > 0:
        raise NonPositiveInitialData(f"r0 must be > 0, got {r0}")
    N, a, b, p, q, s = params.N, params.a, params.b, params.p, params.q, params.s
    w = r0 ** (a + 1) * v0**p / (N + a)
    z = r0 ** (b + 1) * v0**q * w**s / params.ell
    u = u0 + w * r0 / (a + 2)
    v = v0 + z * r0 / ((a + 1) * s + b + 2)
    return RadialState(r=r0, u=u, w=w, v=v, z=z)


def _log_init(params: SystemParams, u0: float, v0: float, r0: float) -> np.ndarray:
    # log-form of init_state; w and z underflow to 0 in linear form for large s
    N, a, b, p, q, s = params.N, params.a, params.b, params.p, params.q, params.s
    if not (u0 > 0 and v0 > 0):
        raise NonPositiveInitialData(f"u0 and v0 must be > 0, got ({u0}, {v0})")
    lr = math.log(r0)
    lw = (a + 1) * lr + p * math.log(v0) - math.log(N + a)
    lz = (b + 1) * lr + q * math.log(v0) + s * lw - math.log(params.ell)
    lu = math.log(u0) + math.log1p(math.exp(lw + lr - math.log(u0)) / (a + 2))
    lv = math.log(v0) + math.log1p(math.exp(lz + lr - math.log(v0)) / ((a + 1) * s + b + 2))
    return np.array([lu, lv, lw, lz])


# --- integration ---------------------------------------------------------------------


def _rhs(params: SystemParams):
    N, a, b, p, q, s = params.N, params.a, params.b, params.p, params.q, params.s

    def f(t, y):
        X, Y, Z, W = np.exp(y[:4])
        return np.array(
            [
                Z - (N - 2) - X,
                W - (N - 2) - Y,
                N + a + p * Y - Z,
                s * Z + N - s * N + s + b + q * Y - W,
                Y,
            ]
        )

    return f


def _unpack(params: SystemParams, t, y):
    """(ln u, ln v, ln u', ln v') from the solver state."""
    lX, lY, lZ, lW, lv = y
    lw = (params.a + 1) * t + params.p * lv - lZ
    lz = (params.b + 1) * t + params.q * lv + params.s * lw - lW
    lu = t + lw - lX
    return lu, lv, lw, lz


def _pack(params: SystemParams, t, lu, lv, lw, lz) -> np.ndarray:
    X, Y, Z, W = phase_quotients(params, t, lu, lv, lw, lz)
    return np.array([np.log(X), np.log(Y), np.log(Z), np.log(W), lv])


def _local_radius_phase(params: SystemParams, t, Y, W):
    """Blow-up radius extrapolated from the local power profile v ~ C (R - r)^(-β).

    For such a profile v v''/v'^2 = (β+1)/β, and in phase quotients this gives
    R - r = r / (W - (N-1) - Y).
    """
    gap = W - (params.N - 1) - Y
    with np.errstate(divide="ignore"):
        return np.where(gap > 0, np.exp(t) * (1.0 + 1.0 / gap), np.inf)


def _local_radius(params: SystemParams, t, y):
    return _local_radius_phase(params, t, math.exp(y[1]), math.exp(y[3]))


def _solve(params, u0, v0, controls: Controls, thresholds: Sequence[float] = ()):
    t0 = math.log(controls.r0)
    y0 = _pack(params, t0, *_log_init(params, u0, v0, controls.r0))
    t1 = math.log(controls.r_max)
    if t1 <= t0:
        raise ValueError("r_max must exceed r0")

    events = []

    def growth(t, y):
        return y[1] - math.log(controls.growth_cap)

    growth.terminal = True
    events.append(growth)
    if math.isfinite(controls.v_cap):
        lcap = math.log(controls.v_cap)

        def vcap(t, y):
            return y[4] - lcap

        vcap.terminal = True
        events.append(vcap)
    level_events = []
    for k, level in enumerate(thresholds):
        ll = math.log(level)

        def lev(t, y, ll=ll):
            return y[4] - ll

        lev.terminal = False
        lev.direction = 1
        level_events.append(lev)
    method = controls.method
    if method == "auto":
        method = "LSODA" if abs(params.kappa) <= CRITICAL_TOL else "DOP853"
    sol = solve_ivp(
        _rhs(params),
        (t0, t1),
        y0,
        method=method,
        rtol=controls.rel_tol,
        atol=controls.abs_tol,
        events=events + level_events,
        dense_output=True,
    )
    return sol, len(events)


def _outcome_from(params, sol, controls: Controls) -> Outcome:
    if sol.status == -1:
        return Outcome("Aborted", reason=f"step size underflow: {sol.message}")
    if sol.status == 0:
        return Outcome("GlobalUpTo", r_max=controls.r_max)
    te = sol.t[-1]
    R_now = float(_local_radius(params, te, sol.y[:, -1]))
    # compare with the extrapolation one accepted step earlier
    R_prev = float(_local_radius(params, sol.t[-2], sol.y[:, -2])) if len(sol.t) > 1 else R_now
    return Outcome("BlowUp", R=R_now, R_uncertainty=abs(R_now - R_prev))


def integrate(
    params: SystemParams,
    u0: float = 1.0,
    v0: float = 1.0,
    controls: Controls | None = None,
    **overrides,
) -> RadialTrajectory:
    """Integrate the regular radial solution with u(0) = u0, v(0) = v0.

    Terminates at r_max (GlobalUpTo), when Y = r v'/v reaches growth_cap or v
    reaches v_cap (BlowUp), or on step-size underflow (Aborted).
    """
    controls = replace(controls or Controls(), **overrides)
    sol, _ = _solve(params, u0, v0, controls)
    outcome = _outcome_from(params, sol, controls)

    t_end = sol.t[-1]
    n = max(2, int(round((t_end - sol.t[0]) / math.log(10) * controls.samples_per_decade)) + 1)
    grid = np.linspace(sol.t[0], t_end, n)
    if outcome.kind != "GlobalUpTo":
        # accepted steps cluster where the solution is singular; subdivide
        # each so that sample spacing resolves the local time scale
        sub = sol.t[:-1, None] + np.diff(sol.t)[:, None] * (np.arange(STEP_SUBDIVISION) / STEP_SUBDIVISION)
        grid = np.union1d(grid, np.append(sub.ravel(), sol.t[-1]))
    S = sol.sol(grid)
    S[:, 0] = sol.y[:, 0]
    S[:, -1] = sol.y[:, -1]
    lu, lv, lw, lz = _unpack(params, grid, S)
    traj = RadialTrajectory(
        params=params,
        initial=(float(u0), float(v0)),
        t=grid,
        log_u=lu,
        log_v=lv,
        log_w=lw,
        log_z=lz,
        outcome=outcome,
        meta={"nfev": int(sol.nfev), "steps": int(len(sol.t)), "rel_tol": controls.rel_tol},
    )
    check_monotone(traj, tol=10 * controls.rel_tol)
    return traj


def check_monotone(traj: RadialTrajectory, tol: float = 1e-9) -> None:
    for name in ("log_u", "log_v", "log_w", "log_z"):
        y = getattr(traj, name)
        d = np.diff(y)
        bad = d < -tol * np.maximum(1.0, np.abs(y[1:]))
        if np.any(bad):
            i = int(np.argmax(bad))
            raise MonotonicityViolation(f"{name[4:]} decreases at r={math.exp(traj.t[i + 1]):.6g}")


# --- a-priori bounds -----------------------------------------------------------------


def sandwich_violations(traj: RadialTrajectory) -> dict[str, float]:
    """Largest relative violation of each a-priori bound along the trajectory.

    Keys: ``du_lower``/``du_upper`` and ``dv_lower``/``dv_upper`` for the
    integral bounds on u' and v', ``d2u_lower``/``d2u_upper`` and
    ``d2v_lower``/``d2v_upper`` for the second-derivative bounds. A value of 0
    means the bound holds at every sample.
    """
    P = traj.params
    N, a, b, p, q, s = P.N, P.a, P.b, P.p, P.q, P.s
    t, lu, lv, lw, lz = traj.t, traj.log_u, traj.log_v, traj.log_w, traj.log_z
    u0, v0 = traj.initial
    lv0 = math.log(v0)

    def excess(lo, hi):
        # relative amount by which exp(lo) exceeds exp(hi)
        return float(np.max(np.maximum(0.0, np.expm1(lo - hi)), initial=0.0))

    out = {
        "du_lower": excess((a + 1) * t + p * lv0 - math.log(N + a), lw),
        "du_upper": excess(lw, (a + 1) * t + p * lv - math.log(N + a)),
        # integrating v'(r) = r^(1-N) ∫ t^(N-1+b) v^q u'^s with the u' lower bound
        # gives the divisor (N+a)^s (N + s(a+1) + b); (N+b)(N+a)^s is too small
        "dv_lower": excess(
            (p * s + q) * lv0 + ((a + 1) * s + b + 1) * t - math.log(P.ell) - s * math.log(N + a), lz
        ),
        "dv_upper": excess(lz, (b + 1) * t + q * lv + s * lw - math.log(N + b)),
    }
    # u'' = r^a v^p - (N-1) u'/r;  v'' = r^b v^q u'^s - (N-1) v'/r
    src_u = a * t + p * lv
    src_v = b * t + q * lv + s * lw
    frac_u = (N - 1) * np.exp(lw - t - src_u)
    frac_v = (N - 1) * np.exp(lz - t - src_v)
    ratio_u = 1.0 - frac_u  # u'' / (r^a v^p)
    ratio_v = 1.0 - frac_v
    out["d2u_lower"] = float(np.max(np.maximum(0.0, (1 + a) / (N + a) - ratio_u), initial=0.0))
    out["d2u_upper"] = float(np.max(np.maximum(0.0, ratio_u - 1.0), initial=0.0))
    out["d2v_lower"] = float(np.max(np.maximum(0.0, (1 + b) / (N + b) - ratio_v), initial=0.0))
    out["d2v_upper"] = float(np.max(np.maximum(0.0, ratio_v - 1.0), initial=0.0))
    return out


# --- blow-up radius ------------------------------------------------------------------


@dataclass(frozen=True)
class BlowUpEstimate:
    R: float
    uncertainty: float
    thresholds: tuple[float, ...]
    radii: tuple[float, ...]
    local_estimates: tuple[float, ...]
    decay_exponent: float | None

    def as_dict(self) -> dict:
        return {
            "R": self.R,
            "uncertainty": self.uncertainty,
            "thresholds": list(self.thresholds),
            "radii": list(self.radii),
            "local_estimates": list(self.local_estimates),
            "decay_exponent": self.decay_exponent,
        }


def _fit_power_limit(levels: np.ndarray, radii: np.ndarray) -> tuple[float, float | None]:
    """Fit r_k = R - c * level_k^(-1/γ); returns (R, γ)."""
    x = np.log10(levels)
    if len(radii) < 3:
        return float(radii[-1]), None
    # three-point closed form on the last three thresholds when equally spaced
    x3, r3 = x[-3:], radii[-3:]
    d1, d2 = r3[1] - r3[0], r3[2] - r3[1]
    if np.isclose(x3[1] - x3[0], x3[2] - x3[1]) and d1 > 0 and d2 > 0 and d2 < d1:
        ratio = d1 / d2  # = 10^(Δx/γ)
        gamma = (x3[1] - x3[0]) / math.log10(ratio)
        return float(r3[2] + d2 / (ratio - 1.0)), float(gamma)
    from scipy.optimize import curve_fit

    def model(xx, R, c, g):
        return R - c * 10.0 ** (-xx / g)

    try:
        popt, _ = curve_fit(model, x, radii, p0=(radii[-1], radii[-1] - radii[0], 1.0), maxfev=5000)
        return float(popt[0]), float(popt[2])
    except RuntimeError:
        return float(radii[-1]), None


def estimate_blowup_radius(
    params: SystemParams,
    u0: float = 1.0,
    v0: float = 1.0,
    thresholds: Sequence[float] = (1e4, 1e6, 1e8),
    controls: Controls | None = None,
) -> BlowUpEstimate:
    """Locate the radii where v crosses each threshold and extrapolate to R.

    Two estimators are combined: a power-law fit r_k = R - c 10^(-k/γ) over
    the threshold crossings, and the local-profile extrapolation evaluated at
    each crossing. The uncertainty is the spread of all estimates from the
    last three thresholds.
    """
    levels = np.asarray(sorted(float(x) for x in thresholds))
    if len(levels) == 0 or levels[0] <= v0:
        raise ValueError("thresholds must be ascending and exceed v0")
    controls = controls or Controls()
    # global solutions cross every threshold too, so the run continues past the
    # last one until the growth index confirms blow-up or r_max is reached
    sol, n_stop = _solve(params, u0, v0, controls, thresholds=levels)
    if sol.status == 0:
        raise NotABlowUp(f"reached r_max = {controls.r_max:g} without blowing up")
    found = [k for k in range(len(levels)) if len(sol.t_events[n_stop + k])]
    if not found:
        raise NotABlowUp("no threshold crossed before the integration stopped")
    lvl = levels[found]
    te = np.array([sol.t_events[n_stop + k][0] for k in found])
    ye = np.array([sol.y_events[n_stop + k][0] for k in found])
    radii = np.exp(te)
    local = np.array([float(_local_radius(params, tt, yy)) for tt, yy in zip(te, ye)])
    if sol.status == -1 or not np.all(np.isfinite(local)):
        raise NotABlowUp(f"integration aborted: {sol.message}")
    R_fit, gamma = _fit_power_limit(lvl, radii)
    tail = list(local[-3:]) + [R_fit]
    R = float(local[-1])
    return BlowUpEstimate(
        R=R,
        uncertainty=float(max(tail) - min(tail)),
        thresholds=tuple(float(x) for x in lvl),
        radii=tuple(float(x) for x in radii),
        local_estimates=tuple(float(x) for x in local),
        decay_exponent=gamma,
    )


# --- empirical classification --------------------------------------------------------


def du_blowup_exponent(traj: RadialTrajectory) -> np.ndarray:
    """Local exponent α in u' ~ C (R - r)^(-α), from u' u''' / u''^2 = (α+1)/α."""
    P = traj.params
    _, Y, Z, _ = traj.quotients()
    g = Z - (P.N - 1)
    denom = Z * (P.N + P.a + P.p * Y - Z) - g
    with np.errstate(divide="ignore", invalid="ignore"):
        return g * g / denom


@dataclass(frozen=True)
class BoundaryFit:
    alpha_local: float
    alpha_fit: float | None
    alpha_spread: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


# decision band for α: u bounded iff ∫ u' dr < ∞ iff α < 1; α = 1 (log growth)
# is the closed endpoint of the both-blow-up clause
ALPHA_BOTH_MIN = 0.98
ALPHA_BOUNDED_MAX = 0.95
ALPHA_AGREE = 0.05


def boundary_fit(traj: RadialTrajectory) -> BoundaryFit:
    """Competing estimates of the u' blow-up exponent near R."""
    _, Y, _, _ = traj.quotients()
    alpha = du_blowup_exponent(traj)
    deep = Y >= 1e4
    idx = np.flatnonzero(deep)
    if len(idx) < 3:
        idx = np.arange(max(0, len(traj) - 5), len(traj))
    a_tail = alpha[idx[-3:]]
    alpha_local = float(a_tail[-1])
    spread = float(np.max(a_tail) - np.min(a_tail))

    alpha_fit = None
    R = traj.outcome.R
    win = (Y >= 1e2) & (Y <= 1e6)
    if R is not None and np.count_nonzero(win) >= 5:
        r = traj.r[win]
        gap = R - r
        ok = gap > 0
        if np.count_nonzero(ok) >= 5:
            slope = np.polyfit(np.log(gap[ok]), traj.log_w[win][ok], 1)[0]
            alpha_fit = float(-slope)
    return BoundaryFit(alpha_local=alpha_local, alpha_fit=alpha_fit, alpha_spread=spread)


def empirical_classification(traj: RadialTrajectory) -> BallClassification:
    kind = traj.outcome.kind
    if kind == "GlobalUpTo":
        if traj.outcome.r_max is not None and np.all(np.isfinite(traj.log_v)):
            return BallClassification(BallKind.ALL_BOUNDED, f"no blow-up up to r={traj.outcome.r_max:g}")
        return BallClassification(BallKind.INCONCLUSIVE, "global run with non-finite samples")
    if kind != "BlowUp":
        return BallClassification(BallKind.INCONCLUSIVE, traj.outcome.reason or kind)
    fit = boundary_fit(traj)
    a = fit.alpha_local
    if not math.isfinite(a) or fit.alpha_spread > ALPHA_AGREE:
        return BallClassification(BallKind.INCONCLUSIVE, f"unsettled exponent (spread {fit.alpha_spread:.3g})")
    side = _alpha_side(a)
    # the power-law fit is biased by the regular part of u' when α is small,
    # so it only has to land on the same side of the band as the local value
    if fit.alpha_fit is not None and _alpha_side(fit.alpha_fit) != side:
        return BallClassification(
            BallKind.INCONCLUSIVE, f"local exponent {a:.4g} vs fitted {fit.alpha_fit:.4g}"
        )
    if side == "both":
        return BallClassification(BallKind.BOTH_BLOW_UP)
    if side == "bounded":
        return BallClassification(BallKind.U_BOUNDED_V_BLOWS_UP)
    return BallClassification(BallKind.INCONCLUSIVE, f"exponent {a:.4g} too close to 1")


def _alpha_side(alpha: float) -> str:
    if alpha >= ALPHA_BOTH_MIN:
        return "both"
    if alpha <= ALPHA_BOUNDED_MAX:
        return "bounded"
    return "band"


# --- scaling -------------------------------------------------------------------------


def scaling_exponents(params: SystemParams) -> tuple[float, float]:
    """(e_u, e_v) with U_λ(r) = λ^e_u U(λ r), V_λ(r) = λ^e_v V(λ r)."""
    N, a, b, p, q, s = params.N, params.a, params.b, params.p, params.q, params.s
    den = s * p + q - 1
    if den == 0:
        raise DegenerateScaling("sp + q - 1 = 0")
    eu = (p * (b + 2 - s) - (a + 2) * (q - 1)) / den
    ev = (b + 2 + s * (a + 1)) / den
    return eu, ev


def scale_solution(traj: RadialTrajectory, lam: float) -> RadialTrajectory:
    if not lam > 0:
        raise ValueError("λ must be positive")
    eu, ev = scaling_exponents(traj.params)
    ll = math.log(lam)
    o = traj.outcome
    outcome = Outcome(
        o.kind,
        r_max=None if o.r_max is None else o.r_max / lam,
        R=None if o.R is None else o.R / lam,
        R_uncertainty=None if o.R_uncertainty is None else o.R_uncertainty / lam,
        reason=o.reason,
    )
    u0, v0 = traj.initial
    return RadialTrajectory(
        params=traj.params,
        initial=(lam**eu * u0, lam**ev * v0),
        t=traj.t - ll,
        log_u=traj.log_u + eu * ll,
        log_v=traj.log_v + ev * ll,
        log_w=traj.log_w + (eu + 1) * ll,
        log_z=traj.log_z + (ev + 1) * ll,
        outcome=outcome,
        meta={**traj.meta, "scaled_by": lam},
    )


def ode_residual(traj: RadialTrajectory) -> float:
    """Largest normalised defect of the sampled data against the radial ODEs.

    On each sample interval the increment of every log-variable is compared
    with the quintic Hermite quadrature of its right-hand side, whose first and
    second t-derivatives are evaluated from the samples through the chain rule.
    The defect in excess of the rounding resolution of the stored samples is
    divided by h * max(1, |rhs|); an exact solution leaves only O(h^6)
    quadrature error.
    """
    P = traj.params
    N = P.N
    X, Y, Z, W = traj.quotients()
    dX, dY, dZ, dW = phase_derivatives(P, X, Y, Z, W)
    a, b, p, q, s = P.a, P.b, P.p, P.q, P.s
    d2X = dX * (Z - (N - 2) - X) + X * (dZ - dX)
    d2Y = dY * (W - (N - 2) - Y) + Y * (dW - dY)
    d2Z = dZ * (N + a + p * Y - Z) + Z * (p * dY - dZ)
    d2W = dW * (s * Z + N - s * N + s + b + q * Y - W) + W * (s * dZ + q * dY - dW)
    f = (X, Y, Z - (N - 1), W - (N - 1))
    f1 = (dX, dY, dZ, dW)
    f2 = (d2X, d2Y, d2Z, d2W)
    h = np.diff(traj.t)
    worst = 0.0
    for y, g, g1, g2 in zip((traj.log_u, traj.log_v, traj.log_w, traj.log_z), f, f1, f2):
        quad = (
            h / 2 * (g[:-1] + g[1:])
            + h**2 / 10 * (g1[:-1] - g1[1:])
            + h**3 / 120 * (g2[:-1] + g2[1:])
        )
        gmax = np.maximum(1.0, np.maximum(np.abs(g[:-1]), np.abs(g[1:])))
        # stored t and y carry a rounding each; after a shift of t (scaling)
        # that alone moves h by ~eps |t|, which near blow-up is not small
        # against h. Only the defect beyond that resolution counts.
        floor = ROUNDING * (np.abs(traj.t[1:]) * gmax + np.abs(y[1:]))
        defect = np.maximum(0.0, np.abs(np.diff(y) - quad) - floor)
        worst = max(worst, float(np.max(defect / (h * gmax))))
    return worst


# --- growth fits ---------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthFit:
    slope_u: float
    slope_v: float
    log_amp_u: float
    log_amp_v: float
    slope_u_stderr: float
    slope_v_stderr: float
    window: tuple[float, float]
    n_samples: int
    rms_residual: float

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["window"] = list(self.window)
        return d


MIN_FIT_SAMPLES = 20


def _line_fit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    dof = max(1, len(x) - 2)
    sigma2 = float(res @ res) / dof
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = math.sqrt(sigma2 / sxx) if sxx > 0 else math.inf
    return float(coef[0]), float(coef[1]), stderr, res


def fit_growth(traj: RadialTrajectory, window_decades: float = 1.0) -> GrowthFit:
    """Least-squares lines of ln u and ln v against ln r over the trailing window."""
    if traj.outcome.kind != "GlobalUpTo":
        raise WindowTooShort(f"growth fit needs a global run, outcome is {traj.outcome.kind}")
    t_hi = traj.t[-1]
    t_lo = t_hi - window_decades * math.log(10)
    m = traj.t >= t_lo - 1e-12
    n = int(np.count_nonzero(m))
    span = (t_hi - traj.t[m][0]) / math.log(10) if n else 0.0
    if n < MIN_FIT_SAMPLES or span < 1.0 - 1e-9:
        raise WindowTooShort(f"fit window has {n} samples spanning {span:.3g} decades")
    x = traj.t[m]
    su, iu, eu, ru = _line_fit(x, traj.log_u[m])
    sv, iv, ev, rv = _line_fit(x, traj.log_v[m])
    rms = math.sqrt(float(np.mean(np.concatenate([ru, rv]) ** 2)))
    return GrowthFit(
        slope_u=su,
        slope_v=sv,
        log_amp_u=iu,
        log_amp_v=iv,
        slope_u_stderr=eu,
        slope_v_stderr=ev,
        window=(math.exp(x[0]), math.exp(x[-1])),
        n_samples=n,
        rms_residual=rms,
    )


def power_trajectory(params: SystemParams, sol: PowerSolution, r) -> RadialTrajectory:
    """Sample an exact pure-power pair as a trajectory (for fit and phase checks)."""
    r = np.asarray(r, dtype=float)
    lu, lv, lw, lz = sol.log_state(r)
    return RadialTrajectory(
        params=params,
        initial=(0.0, 0.0),
        t=np.log(r),
        log_u=np.asarray(lu),
        log_v=np.asarray(lv),
        log_w=np.asarray(lw),
        log_z=np.asarray(lz),
        outcome=Outcome("GlobalUpTo", r_max=float(r[-1])),
        meta={"exact": True},
    )
