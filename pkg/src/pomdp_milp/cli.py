"""Command-line front end.

Subcommands: parse, solve, bounds, simulate, generate. Exit codes: 0 on
success, 2 on input problems, 3 on solve or runtime failures.
"""

from __future__ import annotations

import functools
import json
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np

from . import instances as inst
from .core import validate
from .core.model import Pomdp, WcPomdp
from .core.product import product_pomdp
from .core.wcjson import dump_wcpomdp, load_wcpomdp
from .errors import FormatError, PomdpMilpError
from .lpmodel import SolveParams
from .milp_pomdp import (
    FormulationOptions,
    final_gap,
    integrity_gap,
    solve_mdp_lp,
    solve_pomdp_milp,
)
from .milp_wcpomdp import (
    WcFormulationOptions,
    compute_bounds,
    lagrangian_colgen,
    solve_lower_bound,
    solve_wc_milp,
)
from .policy_engine import PolicyFormulation, monte_carlo_eval
from .pomdp_format import load_pomdp_file, write_pomdp

WC_FORMULATIONS = ("ip", "lb", "lr", "rc", "r")
SOLVE_FORMULATIONS = WC_FORMULATIONS + ("mdp", "milp")


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    """Map domain errors onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FormatError as e:
            loc = ""
            if getattr(e, "line", None) is not None:
                loc = f" (line {e.line})"
            _fail(2, f"{e}{loc}")
        except FileNotFoundError as e:
            _fail(2, str(e))
        except ValueError as e:
            _fail(2, str(e))
        except PomdpMilpError as e:
            _fail(3, str(e))

    return wrapper


def _load(path: str):
    """Load a model file; ('pomdp', Pomdp, meta) or ('wc', WcPomdp, None)."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such file: {path}")
    if p.suffix == ".pomdp":
        pomdp, meta = load_pomdp_file(path)
        return "pomdp", pomdp, meta
    wc = load_wcpomdp(path)
    return "wc", wc, None


def _emit(row: dict, header: list[str], out: str | None, fmt: str):
    if fmt == "json":
        text = json.dumps(row, indent=1, default=float) + "\n"
    else:
        cells = []
        for k in header:
            v = row[k]
            if isinstance(v, float):
                cells.append(f"{v:.6f}" if math.isfinite(v) else "nan")
            else:
                cells.append(str(v))
        text = ",".join(header) + "\n" + ",".join(cells) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


def _policy_sidecar(out: str | None, instance: str, payload: dict) -> str:
    base = Path(out) if out else Path(Path(instance).stem)
    path = str(base) + ".policy.json"
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
    return path


def solver_params(time_limit: float, mip_gap: float, threads: int) -> SolveParams:
    return SolveParams(
        time_limit_seconds=time_limit, relative_mip_gap=mip_gap, threads=threads
    )


@click.group()
@click.version_option(package_name="pomdp-milp", prog_name="pomdp-milp")
def main():
    """Exact memoryless policies for partially observed decision processes."""


@main.command("parse")
@click.argument("path", type=click.Path())
@_guard
def cmd_parse(path):
    """Validate a .pomdp or coupled-model JSON file and print its shape."""
    kind, obj, meta = _load(path)
    if kind == "pomdp":
        click.echo(
            f"pomdp: {obj.n_states} states, {obj.n_obs} observations, "
            f"{obj.n_actions} actions"
        )
        if meta and meta.warnings:
            for w in meta.warnings:
                click.echo(f"warning: {w}")
    else:
        click.echo(
            f"weakly coupled: M={obj.n_components}, q={obj.n_resources}, "
            f"budget={list(np.asarray(obj.budget))}"
        )
        for m, comp in enumerate(obj.components):
            click.echo(
                f"  component {m}: {comp.n_states} states, {comp.n_obs} observations, "
                f"{comp.n_actions} actions"
            )
    report = validate(obj)
    if report.ok:
        click.echo("valid")
    else:
        for issue in report.issues:
            click.echo(f"invalid: {issue}")
        sys.exit(2)


@main.command("solve")
@click.argument("path", type=click.Path())
@click.option("--horizon", "-T", type=int, required=True, help="Number of decision periods.")
@click.option("--formulation", "-f", type=click.Choice(SOLVE_FORMULATIONS), default="milp")
@click.option("--cuts/--no-cuts", default=False, help="Add the strengthening inequalities.")
@click.option("--relax", is_flag=True, help="Solve the continuous relaxation.")
@click.option("--time-limit", type=float, default=3600.0, show_default=True)
@click.option("--mip-gap", type=float, default=0.01, show_default=True)
@click.option("--backend", default=None, help="Solver backend (reference or highs).")
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", default=None, help="Report file; stdout when omitted.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@_guard
def cmd_solve(path, horizon, formulation, cuts, relax, time_limit, mip_gap, backend,
              threads, out, fmt):
    """Solve one formulation and report objective, bound and gaps."""
    kind, obj, _ = _load(path)
    params = solver_params(time_limit, mip_gap, threads)
    T = horizon
    t0 = time.monotonic()
    g_i = math.nan
    policy_payload = None

    if formulation in ("milp", "mdp"):
        pomdp = obj if kind == "pomdp" else product_pomdp(obj)
        if formulation == "mdp":
            z = solve_mdp_lp(pomdp, T)
            best = z
        else:
            opts = FormulationOptions(use_cuts=cuts, relax=relax)
            z, policy, _, best = solve_pomdp_milp(pomdp, T, opts, params, backend)
            if not relax:
                z_rel = solve_pomdp_milp(
                    pomdp, T, FormulationOptions(use_cuts=cuts, relax=True), params, backend
                )[0]
                g_i = integrity_gap(z, z_rel)
            policy_payload = {
                "kind": "memoryless",
                "horizon": T,
                "deterministic": bool(policy.deterministic),
                "delta": policy.delta.tolist(),
            }
    else:
        if kind != "wc":
            raise ValueError(
                f"formulation {formulation!r} needs a weakly coupled instance"
            )
        if formulation == "ip":
            opts = WcFormulationOptions(use_cuts=cuts, relax=False)
            z, policies, _, best = solve_wc_milp(obj, T, opts, params, backend)
            z_rel = solve_wc_milp(
                obj, T, WcFormulationOptions(use_cuts=cuts, relax=True), params, backend
            )[0]
            g_i = integrity_gap(z, z_rel)
        elif formulation in ("r", "rc"):
            opts = WcFormulationOptions(use_cuts=(formulation == "rc"), relax=True)
            z, policies, _, best = solve_wc_milp(obj, T, opts, params, backend)
        elif formulation == "lb":
            res = solve_lower_bound(obj, T, WcFormulationOptions(use_cuts=cuts), params, backend)
            z, policies, best = res.z, res.policies, res.z
        else:  # lr
            res = lagrangian_colgen(obj, T, params, backend)
            z, best, policies = res.z, res.dual_bound, None
            policy_payload = {
                "kind": "action-marginals",
                "horizon": T,
                "tau": [t.tolist() for t in res.tau],
            }
        if policies is not None:
            policy_payload = {
                "kind": "per-component",
                "horizon": T,
                "components": [
                    {"deterministic": bool(p.deterministic), "delta": p.delta.tolist()}
                    for p in policies
                ],
            }
    wall = time.monotonic() - t0

    row = {
        "instance": Path(path).name,
        "T": T,
        "formulation": formulation,
        "cuts": cuts,
        "relax": relax,
        "objective": z,
        "best_bound": best,
        "g_i": g_i,
        "g_f": final_gap(z, best),
        "time_s": wall,
        "status": "ok",
    }
    _emit(row, list(row.keys()), out, fmt)
    if policy_payload is not None:
        sidecar = _policy_sidecar(out, path, policy_payload)
        click.echo(f"policy written to {sidecar}", err=True)


@main.command("bounds")
@click.argument("path", type=click.Path())
@click.option("--horizon", "-T", type=int, required=True)
@click.option("--time-limit", type=float, default=3600.0, show_default=True)
@click.option("--mip-gap", type=float, default=0.01, show_default=True)
@click.option("--backend", default=None)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@_guard
def cmd_bounds(path, horizon, time_limit, mip_gap, backend, threads, out, fmt):
    """Compute the bound chain for a weakly coupled instance."""
    kind, obj, _ = _load(path)
    if kind != "wc":
        raise ValueError("bounds needs a weakly coupled instance")
    params = solver_params(time_limit, mip_gap, threads)
    report = compute_bounds(obj, horizon, params, backend, instance=Path(path).name)
    if fmt == "json":
        _emit(asdict(report), [], out, "json")
    else:
        text = report.CSV_HEADER + "\n" + report.csv_row() + "\n"
        if out:
            Path(out).write_text(text, encoding="utf-8")
            click.echo(f"wrote {out}")
        else:
            click.echo(text, nl=False)
    failed = [k for k, v in report.statuses.items() if v != "ok"]
    for name, ok in report.orderings():
        click.echo(f"{name}: {'PASS' if ok else 'FAIL'}")
    if failed:
        _fail(3, "failed solves: " + ", ".join(failed))


@main.command("simulate")
@click.argument("path", type=click.Path())
@click.option("--horizon", "-T", type=int, required=True)
@click.option("--rolling", "t_r", type=int, default=None,
              help="Re-solve window length; defaults to the full horizon.")
@click.option("--runs", "-N", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--formulation", "-f", type=click.Choice(WC_FORMULATIONS), default="ip")
@click.option("--cuts/--no-cuts", default=False)
@click.option("--time-limit", type=float, default=3600.0, show_default=True)
@click.option("--mip-gap", type=float, default=0.01, show_default=True)
@click.option("--backend", default=None)
@click.option("--threads", type=int, default=1, show_default=True,
              help="Upper bound on run parallelism; runs execute sequentially in this build.")
@click.option("--no-gaps", is_flag=True, help="Skip the full-horizon bound solves.")
@click.option("--out", default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@_guard
def cmd_simulate(path, horizon, t_r, runs, seed, formulation, cuts, time_limit,
                 mip_gap, backend, threads, no_gaps, out, fmt):
    """Monte-Carlo evaluation of the rolling-horizon implicit policy."""
    kind, obj, _ = _load(path)
    if kind != "wc":
        raise ValueError("simulate needs a weakly coupled instance")
    T = horizon
    T_r = t_r if t_r is not None else T
    params = solver_params(time_limit, mip_gap, threads)
    form = PolicyFormulation(kind=formulation.upper(), params=params, use_cuts=cuts)
    gamma = math.nan
    labels = obj.labels or {}
    if isinstance(labels.get("gamma"), (int, float)):
        gamma = float(labels["gamma"])
    report = monte_carlo_eval(
        obj,
        T,
        T_r,
        form,
        runs,
        seed,
        backend=backend,
        instance=Path(path).name,
        gamma=gamma,
        compute_gaps=not no_gaps,
    )
    header = report.CSV_HEADER
    row = report.csv_row()
    if formulation in ("r", "rc", "lr"):
        header += ",rejections_mean"
        row += f",{report.rejections_mean:.6f}"
    if fmt == "json":
        _emit(asdict(report), [], out, "json")
    else:
        text = header + "\n" + row + "\n"
        if out:
            Path(out).write_text(text, encoding="utf-8")
            click.echo(f"wrote {out}")
        else:
            click.echo(text, nl=False)
    click.echo(
        f"nu = {report.nu_mean:.4f} +/- {report.nu_stderr:.4f} over {runs} runs",
        err=True,
    )


@main.command("generate")
@click.option("--family", required=True,
              type=click.Choice(["random", "reg-sar", "rstls-sar", "rstls-sbr",
                                 "rstls-det-sbr", "maintenance", "counterexamples",
                                 "decomposable"]))
@click.option("--states", type=int, default=3, show_default=True, help="States (random/decomposable).")
@click.option("--obs-actions", type=int, default=3, show_default=True,
              help="Observations = actions (random/decomposable).")
@click.option("--arms", type=int, default=2, show_default=True, help="Arms (bandit families).")
@click.option("--n", type=int, default=4, show_default=True, help="States per arm (bandits).")
@click.option("--k", type=int, default=1, show_default=True, help="Arms activated per period.")
@click.option("--m", type=int, default=3, show_default=True, help="Components (maintenance/decomposable).")
@click.option("--gamma", type=float, default=0.4, show_default=True, help="Capacity ratio (maintenance).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=".", show_default=True, help="Output directory.")
@_guard
def cmd_generate(family, states, obs_actions, arms, n, k, m, gamma, seed, out):
    """Write generated instances to disk."""
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    if family == "random":
        pomdp = inst.gen_random_pomdp(states, obs_actions, seed)
        path = outdir / f"random_s{states}_oa{obs_actions}_seed{seed}.pomdp"
        path.write_text(write_pomdp(pomdp), encoding="utf-8")
        written.append(path)
    elif family in ("reg-sar", "rstls-sar", "rstls-sbr", "rstls-det-sbr"):
        kind = family.upper().replace("-", "_")
        wc = inst.gen_bandit(inst.BanditFamily(kind=kind, M=arms, n=n, K=k, seed=seed))
        path = outdir / f"{family}_M{arms}_n{n}_K{k}_seed{seed}.json"
        dump_wcpomdp(wc, str(path))
        written.append(path)
    elif family == "maintenance":
        wc = inst.gen_maintenance(m, gamma, seed=seed)
        K = (wc.labels or {}).get("K")
        path = outdir / f"maintenance_M{m}_gamma{gamma:g}_K{K}_seed{seed}.json"
        dump_wcpomdp(wc, str(path))
        written.append(path)
    elif family == "counterexamples":
        low, high = inst.counterexample_instances()
        for wc, name in ((low, "counterexample_low.json"), (high, "counterexample_high.json")):
            path = outdir / name
            dump_wcpomdp(wc, str(path))
            written.append(path)
    else:  # decomposable
        wc = inst.gen_decomposable(m, states, obs_actions, seed)
        path = outdir / f"decomposable_M{m}_s{states}_a{obs_actions}_seed{seed}.json"
        dump_wcpomdp(wc, str(path))
        written.append(path)
    for path in written:
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
