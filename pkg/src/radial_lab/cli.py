"""Command-line front end: ``radial-lab <subcommand> [flags]``.

Every subcommand writes ``results.json`` (a result envelope) to ``--out`` and
prints it to stdout. Exit codes: 0 success, 1 every sweep cell failed, 2
invalid input, 3 inconclusive verdict, 4 theory hypotheses not met.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from itertools import product
from pathlib import Path

import numpy as np

from . import __version__
from .errors import GuardViolation, HypothesisViolated, RadialLabError, ValidationError, WindowTooShort
from .ko import PowerLaw, Tabulated, classical_ko_verdict, ko_verdicts, sqrtf_equivalence, theorem1_classify
from .model import (
    THRESHOLD_TOL,
    BallKind,
    SystemParams,
    asymptotic_profile,
    classify_ball,
    divergence_condition,
    equilibria,
    exact_power_solution,
    global_existence,
    stability_report,
)
from .phase import (
    box_check,
    comparison_check,
    divergence_sample,
    integrate_phase,
    phase_image,
    random_ordered_pair,
)
from .shooter import (
    Controls,
    empirical_classification,
    estimate_blowup_radius,
    fit_growth,
    integrate,
    sandwich_violations,
)

SCHEMA_VERSION = "1.0"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_VALIDATION = 2
EXIT_INCONCLUSIVE = 3
EXIT_HYPOTHESIS = 4

SWEEP_S = (1.0, 1.5, 2.0, 3.0, 5.0)
SWEEP_P = (0.3, 0.5, 1.0, 2.0)
SWEEP_Q = (0.1, 0.5, 1.0, 1.5)

# a u-exponent within this many fit standard errors counts as reproduced
REJECT_SIGMA = 20.0


# --- JSON helpers -------------------------------------------------------------------


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, BallKind):
        return x.value
    return x


def dumps(obj) -> str:
    # repr of a float is the shortest string that round-trips exactly
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def envelope(command: str, params: SystemParams | None, **sections) -> dict:
    env = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "radial-lab", "version": __version__},
        "command": command,
        "status": "ok",
        "params": params.as_dict() if params is not None else None,
        "verdicts": {},
        "fits": {},
        "profiles": {},
        "discrepancy": None,
        "timing": None,
        "messages": [],
    }
    env.update(sections)
    return env


def _classification(c) -> dict:
    return {"kind": c.kind.value, "reason": c.reason}


# --- argument parsing ---------------------------------------------------------------


def _add_params(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_argument_group("system parameters")
    g.add_argument("--N", type=int, required=required, default=None if required else 3)
    g.add_argument("--a", type=float, required=required, default=None if required else 0.0)
    g.add_argument("--b", type=float, required=required, default=None if required else 0.0)
    if required:
        g.add_argument("--p", type=float, required=True)
        g.add_argument("--q", type=float, required=True)
    g.add_argument("--s", type=float, default=1.0)


def _add_controls(p: argparse.ArgumentParser, r_max: float = 1e6) -> None:
    g = p.add_argument_group("integrator controls")
    g.add_argument("--r-max", type=float, default=r_max)
    g.add_argument("--v-cap", type=float, default=math.inf)
    g.add_argument("--rel-tol", type=float, default=1e-10)
    g.add_argument("--u0", type=float, nargs="+", default=[1.0], help="u(0), one value per run")
    g.add_argument("--v0", type=float, nargs="+", default=[1.0], help="v(0), paired with --u0")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timing", action="store_true", help="record wall-clock time (breaks byte-identical output)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="radial-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="closed-form, global-existence and integral-test classification")
    _add_params(p)
    _add_common(p)

    p = sub.add_parser("integrate", help="integrate radial solutions and write trajectory/phase CSVs")
    _add_params(p)
    _add_controls(p)
    p.add_argument("--blowup-radius", action="store_true", help="estimate R from threshold crossings")
    _add_common(p)

    p = sub.add_parser("verify-asymptotics", help="fit growth rates at infinity against the asymptotic profile")
    _add_params(p)
    _add_controls(p)
    p.add_argument("--window", type=float, default=1.0, help="fit window in decades")
    p.add_argument("--phase-span", type=float, default=40.0, help="extra phase time used to decide the limit")
    _add_common(p)

    p = sub.add_parser("ko-test", help="integral tests for a nonlinearity f")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--s", type=float, default=1.0, help="f(t) = t^s")
    src.add_argument("--f-csv", type=Path, help="tabulated f as CSV with header t,f")
    p.add_argument("--cutoff", type=float, default=1e12)
    p.add_argument("--margin", type=float, default=0.05)
    _add_common(p)

    p = sub.add_parser("sweep", help="cartesian (s, p, q) sweep comparing classifications")
    _add_params(p, required=False)
    p.add_argument("--s-values", type=float, nargs="+", default=list(SWEEP_S))
    p.add_argument("--p-values", type=float, nargs="+", default=list(SWEEP_P))
    p.add_argument("--q-values", type=float, nargs="+", default=list(SWEEP_Q))
    p.add_argument("--r-max", type=float, default=1e6)
    p.add_argument("--rel-tol", type=float, default=1e-10)
    p.add_argument("--no-integrate", action="store_true", help="skip the radial run per cell")
    p.add_argument("--workers", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("phase", help="phase-system checks: flow, box, limit, stability, comparison")
    _add_params(p)
    p.add_argument("--xi0", type=float, nargs=3, metavar=("Y", "Z", "W"), default=None)
    p.add_argument("--t-max", type=float, default=40.0)
    p.add_argument("--pairs", type=int, default=50, help="random ordered pairs for the comparison check")
    _add_common(p)
    return ap


def _params(args) -> SystemParams:
    return SystemParams(args.N, args.a, args.b, args.p, args.q, args.s)


def _controls(args) -> Controls:
    return Controls(r_max=args.r_max, v_cap=args.v_cap, rel_tol=args.rel_tol)


def _initial_data(args) -> list[tuple[float, float]]:
    if len(args.u0) != len(args.v0):
        raise ValidationError("--u0 and --v0 need the same number of values")
    return list(zip(args.u0, args.v0))


def _trajectory_name(i: int) -> str:
    return "trajectory.csv" if i == 0 else f"trajectory_{i + 1}.csv"


def _phase_name(i: int) -> str:
    return "phase.csv" if i == 0 else f"phase_{i + 1}.csv"


# --- subcommands ---------------------------------------------------------------------


def cmd_classify(args) -> tuple[dict, int]:
    P = _params(args)
    closed = classify_ball(P)
    try:
        ko = theorem1_classify(PowerLaw(P.s), P.p, P.q)
    except GuardViolation as e:
        ko = None
        ko_reason = str(e)
    ge = global_existence(P)
    verdicts = {
        # the closed form is authoritative for power laws; the others cross-check it
        "verdict": closed.kind.value,
        "closed_form": _classification(closed),
        "global_existence": ge,
        "integral_test": _classification(ko) if ko else {"kind": BallKind.OUT_OF_THEORY.value, "reason": ko_reason},
    }
    ko_kind = ko.kind if ko else BallKind.OUT_OF_THEORY
    # all bounded in every ball is the same statement as global existence
    verdicts["agreement"] = closed.kind == ko_kind and (closed.kind == BallKind.ALL_BOUNDED) == ge
    env = envelope("classify", P, verdicts=verdicts)
    if BallKind.INCONCLUSIVE in (closed.kind, ko_kind):
        env["status"] = "inconclusive"
        return env, EXIT_INCONCLUSIVE
    return env, EXIT_OK


def _run_record(traj) -> dict:
    rec = {
        "initial": list(traj.initial),
        "outcome": traj.outcome.as_dict(),
        "samples": len(traj),
        "empirical_classification": _classification(empirical_classification(traj)),
        "sandwich_violations": sandwich_violations(traj),
    }
    return rec


def cmd_integrate(args) -> tuple[dict, int]:
    P = _params(args)
    ctl = _controls(args)
    runs = []
    for i, (u0, v0) in enumerate(_initial_data(args)):
        traj = integrate(P, u0, v0, ctl)
        rec = _run_record(traj)
        if args.blowup_radius and traj.outcome.kind == "BlowUp":
            rec["blowup_estimate"] = estimate_blowup_radius(P, u0, v0, controls=ctl).as_dict()
        if args.out:
            traj.to_csv(args.out / _trajectory_name(i))
            phase_image(traj).to_csv(args.out / _phase_name(i))
        runs.append(rec)
    kinds = {r["empirical_classification"]["kind"] for r in runs}
    env = envelope("integrate", P, verdicts={"runs": runs, "closed_form": _classification(classify_ball(P))})
    if BallKind.INCONCLUSIVE.value in kinds:
        env["status"] = "inconclusive"
        return env, EXIT_INCONCLUSIVE
    return env, EXIT_OK


def _rel(x: float, ref: float) -> float:
    return abs(x - ref) / abs(ref)


def cmd_verify_asymptotics(args) -> tuple[dict, int]:
    P = _params(args)
    prof = asymptotic_profile(P)  # raises HypothesisViolated outside p < 1, ps + q < 1
    ctl = _controls(args)
    exact = exact_power_solution(P)
    runs = []
    discrepancy_runs = []
    limit = None
    for i, (u0, v0) in enumerate(_initial_data(args)):
        traj = integrate(P, u0, v0, ctl)
        if traj.outcome.kind != "GlobalUpTo":
            raise HypothesisViolated(f"run from ({u0:g}, {v0:g}) ended with {traj.outcome.kind}")
        fit = fit_growth(traj, args.window)
        ph = phase_image(traj)
        rec = {
            "initial": [u0, v0],
            "fit": fit.as_dict(),
            "slope_v_rel_error": _rel(fit.slope_v, prof.A),
            "slope_u_rel_error": _rel(fit.slope_u, prof.D),
            "log_amp_v_rel_error": _rel(fit.log_amp_v, prof.log_c_v),
            "log_amp_u_rel_error_derived": _rel(fit.log_amp_u, prof.log_c_u_derived),
            "log_amp_u_rel_error_published": _rel(fit.log_amp_u, prof.log_c_u_published),
            "box_violations": len(box_check(ph, 1e-6)),
        }
        # continue the phase flow from the last radial state to decide the limit
        end = (ph.Y[-1], ph.Z[-1], ph.W[-1])
        flow = integrate_phase(P, end, (0.0, args.phase_span))
        rec["phase_limit"] = flow.limit.as_dict()
        if i == 0:
            limit = flow.limit
        runs.append(rec)
        sigma = (fit.slope_u - prof.rho_u_published) / fit.slope_u_stderr if fit.slope_u_stderr > 0 else math.inf
        discrepancy_runs.append(
            {
                "initial": [u0, v0],
                "slope_u": fit.slope_u,
                "slope_u_stderr": fit.slope_u_stderr,
                "sigma_from_published": abs(sigma),
                "published_rejected": abs(sigma) > REJECT_SIGMA,
                "amplitude_prefers": (
                    "derived"
                    if rec["log_amp_u_rel_error_derived"] < rec["log_amp_u_rel_error_published"]
                    else "published"
                ),
            }
        )
        if args.out:
            traj.to_csv(args.out / _trajectory_name(i))
            ph.to_csv(args.out / _phase_name(i))
    discrepancy = {
        "quantity": "u growth exponent and amplitude",
        "rho_u_published": prof.rho_u_published,
        "rho_u_derived": prof.rho_u_derived,
        "log_c_u_published": prof.log_c_u_published,
        "log_c_u_derived": prof.log_c_u_derived,
        "reject_threshold_sigma": REJECT_SIGMA,
        "runs": discrepancy_runs,
        "published_rejected": all(r["published_rejected"] for r in discrepancy_runs),
        "active": abs(prof.rho_u_published - prof.rho_u_derived) > 1e-12,
    }
    _, xi2 = equilibria(P)
    profiles = {
        "asymptotic": prof.as_dict(),
        "exact_power_solution": {"log_c_u": exact.log_c_u, "rho_u": exact.rho_u, "log_c_v": exact.log_c_v, "rho_v": exact.rho_v},
        "xi2": list(xi2),
    }
    verdicts = {"phase_limit": limit.as_dict() if limit else None}
    env = envelope("verify-asymptotics", P, verdicts=verdicts, fits={"runs": runs}, profiles=profiles, discrepancy=discrepancy)
    if limit is None or limit.kind != "ConvergedTo":
        env["status"] = "inconclusive"
        return env, EXIT_INCONCLUSIVE
    return env, EXIT_OK


def cmd_ko_test(args) -> tuple[dict, int]:
    f = Tabulated.from_csv(args.f_csv) if args.f_csv else PowerLaw(args.s)
    if args.f_csv:
        f.check(np.logspace(math.log10(max(f.t[f.t > 0][0], 1e-12)), math.log10(f.t[-1]), 200))
    kw = {"cutoff": args.cutoff, "margin": args.margin}
    v = ko_verdicts(f, args.p, args.q, **kw)
    cls = theorem1_classify(f, args.p, args.q, **kw)
    sq = sqrtf_equivalence(f, args.p, args.q, **kw)
    classical = classical_ko_verdict(f, **kw)
    verdicts = {
        "integral_tests": v.as_dict(),
        "classification": _classification(cls),
        "sqrtf": sq.as_dict(),
        "classical_single_equation": classical.as_dict(),
    }
    env = envelope("ko-test", None, verdicts=verdicts)
    env["params"] = {"p": args.p, "q": args.q, "f": f.describe()}
    if cls.kind == BallKind.INCONCLUSIVE:
        env["status"] = "inconclusive"
        return env, EXIT_INCONCLUSIVE
    return env, EXIT_OK


SUMMARY_FIELDS = (
    "index", "s", "p", "q", "status", "closed_form", "ko_plain", "ko_weighted",
    "ko_classification", "agreement", "empirical", "slope_u_rel_error", "slope_v_rel_error", "error",
)


def sweep_cell(task: tuple) -> dict:
    """One sweep cell; never raises, failures are recorded in the row."""
    index, (N, a, b), (s, p, q), r_max, rel_tol, run = task
    row = {k: "" for k in SUMMARY_FIELDS}
    row.update(index=index, s=s, p=p, q=q)
    env = None
    try:
        P = SystemParams(N, a, b, p, q, s)
        closed = classify_ball(P)
        v = ko_verdicts(PowerLaw(s), p, q)
        ko = theorem1_classify(PowerLaw(s), p, q)
        row.update(
            closed_form=closed.kind.value,
            ko_plain=v.plain.verdict,
            ko_weighted=v.weighted.verdict,
            ko_classification=ko.kind.value,
            agreement=closed.kind == ko.kind,
        )
        verdicts = {"closed_form": _classification(closed), "integral_tests": v.as_dict(), "integral_test": _classification(ko)}
        fits = {}
        if run:
            traj = integrate(P, 1.0, 1.0, Controls(r_max=r_max, rel_tol=rel_tol))
            emp = empirical_classification(traj)
            row["empirical"] = emp.kind.value
            verdicts["empirical"] = _classification(emp)
            verdicts["outcome"] = traj.outcome.as_dict()
            if P.p < 1 and P.kappa > THRESHOLD_TOL and traj.outcome.kind == "GlobalUpTo":
                prof = asymptotic_profile(P)
                fit = fit_growth(traj)
                row.update(slope_u_rel_error=_rel(fit.slope_u, prof.D), slope_v_rel_error=_rel(fit.slope_v, prof.A))
                fits = {"fit": fit.as_dict(), "slope_u_rel_error": row["slope_u_rel_error"], "slope_v_rel_error": row["slope_v_rel_error"]}
        row["status"] = "ok"
        env = envelope("sweep-cell", P, verdicts=verdicts, fits=fits)
    except (RadialLabError, ValueError) as e:
        row.update(status="error", error=f"{type(e).__name__}: {e}")
        env = envelope("sweep-cell", None, status="error", messages=[row["error"]])
        env["params"] = {"N": N, "a": a, "b": b, "p": p, "q": q, "s": s}
    return {"row": row, "envelope": env}


def _csv_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def cmd_sweep(args) -> tuple[dict, int]:
    cells = list(product(args.s_values, args.p_values, args.q_values))
    tasks = [
        (i, (args.N, args.a, args.b), cell, args.r_max, args.rel_tol, not args.no_integrate)
        for i, cell in enumerate(cells)
    ]
    workers = args.workers if args.workers is not None else min(8, os.cpu_count() or 1)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(sweep_cell, tasks, chunksize=4))
    else:
        results = [sweep_cell(t) for t in tasks]
    results.sort(key=lambda r: r["row"]["index"])
    rows = [r["row"] for r in results]
    ok = [r for r in rows if r["status"] == "ok"]
    agree = sum(1 for r in ok if r["agreement"] is True)
    # an opposite verdict is a disagreement where neither side is Inconclusive
    opposite = [
        r["index"] for r in ok
        if r["agreement"] is False and BallKind.INCONCLUSIVE.value not in (r["closed_form"], r["ko_classification"])
    ]
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
    wr.writeheader()
    for r in rows:
        wr.writerow({k: _csv_value(r[k]) for k in SUMMARY_FIELDS})
    if args.out:
        (args.out / "summary.csv").write_text(buf.getvalue())
        cell_dir = args.out / "cells"
        cell_dir.mkdir(exist_ok=True)
        for r in results:
            (cell_dir / f"cell_{r['row']['index']:04d}.json").write_text(dumps(r["envelope"]))
    verdicts = {
        "cells": len(rows),
        "succeeded": len(ok),
        "agreeing": agree,
        "agreement_fraction": agree / len(ok) if ok else None,
        "inconclusive": sum(1 for r in ok if r["ko_classification"] == BallKind.INCONCLUSIVE.value),
        "opposite_verdicts": opposite,
        "failed": [r["index"] for r in rows if r["status"] != "ok"],
    }
    env = envelope("sweep", None, verdicts=verdicts)
    env["params"] = {
        "N": args.N, "a": args.a, "b": args.b,
        "s_values": args.s_values, "p_values": args.p_values, "q_values": args.q_values,
    }
    return env, (EXIT_OK if ok else EXIT_FAILED)


def cmd_phase(args) -> tuple[dict, int]:
    P = _params(args)
    if P.kappa <= 0:
        raise HypothesisViolated("the phase box needs ps + q < 1")
    xi1, xi2 = equilibria(P)
    xi0 = args.xi0 if args.xi0 is not None else [0.5 * (l + h) for l, h in zip(xi1, xi2)]
    flow = integrate_phase(P, xi0, (0.0, args.t_max))
    rng = np.random.default_rng(args.seed)
    worst = None
    for _ in range(args.pairs):
        lo, hi = random_ordered_pair(P, rng)
        rep = comparison_check(P, lo, hi)
        if worst is None or rep.max_violation > worst.max_violation:
            worst = rep
    verdicts = {
        "limit": flow.limit.as_dict(),
        "box_violations": len(box_check(flow, 1e-6)),
        "divergence": divergence_sample(P).as_dict(),
        "divergence_condition": divergence_condition(P),
        "comparison": {"pairs": args.pairs, **(worst.as_dict() if worst else {})},
    }
    profiles = {"xi1": list(xi1), "xi2": list(xi2), "xi0": list(xi0)}
    if P.p < 1:
        profiles["stability"] = stability_report(P).as_dict()
    if args.out:
        flow.to_csv(args.out / "phase.csv")
    env = envelope("phase", P, verdicts=verdicts, profiles=profiles)
    if flow.limit.kind != "ConvergedTo":
        env["status"] = "inconclusive"
        return env, EXIT_INCONCLUSIVE
    return env, EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "integrate": cmd_integrate,
    "verify-asymptotics": cmd_verify_asymptotics,
    "ko-test": cmd_ko_test,
    "sweep": cmd_sweep,
    "phase": cmd_phase,
}


def run(argv=None) -> tuple[dict, int]:
    """Parse ``argv`` and execute; returns (envelope, exit code)."""
    args = build_parser().parse_args(argv)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        env, code = COMMANDS[args.command](args)
    except (ValidationError, ValueError) as e:
        env, code = envelope(args.command, None, status="validation_error", messages=[f"{type(e).__name__}: {e}"]), EXIT_VALIDATION
    except (HypothesisViolated, WindowTooShort) as e:
        env, code = envelope(args.command, None, status="hypothesis_violated", messages=[f"{type(e).__name__}: {e}"]), EXIT_HYPOTHESIS
    if args.timing:
        env["timing"] = {"seconds": time.perf_counter() - t0}
    if args.out:
        (args.out / "results.json").write_text(dumps(env))
    return env, code


def main(argv=None) -> int:
    env, code = run(argv)
    sys.stdout.write(dumps(env))
    if code == EXIT_VALIDATION:
        for m in env["messages"]:
            print(m, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
