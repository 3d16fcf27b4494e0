"""Command-line entry point.

    cointegra SUBCOMMAND --config PATH [--out DIR] [--seed N] [--tol X]

Exit status is 0 on success, 1 when a numerical verification fails and 2 on
configuration errors.  ``--config fixture:NAME`` loads a shipped example.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import plotting
from .config import (
    RunConfig,
    build_levy,
    build_mcarma,
    build_measure,
    build_var,
    load_config,
    measure_to_config,
    parse_config,
)
from .errors import CointegraError, ConfigError
from .fixtures import NAMES, fixture_text
from .io import write_csv, write_json
from .kernel import default_step, integral_of_f, laplace_check, solve_kernel, truncation_horizon
from .levy import ecf_residual, project_xi, simulate_ensemble, variance_profile
from .mcarma import carma_c0, check_cointegrated_conditions, fourier_identity_error, msdde_from_mcarma
from .measure import MatExpDensity, SignedMatrixMeasure
from .spectral import REJECTED, CharacteristicFunction, c0_residue_numeric, check_conditions, cointegration_structure
from .var_oracle import (
    cointegration_angles,
    discretization_bridge,
    root_mapping,
    series_identity_error,
    simulate_var,
    var_ecf,
    var_granger,
)

SUBCOMMANDS = ("analyze", "kernel", "simulate", "mcarma", "var-oracle", "bridge", "verify")


class VerificationFailure(CointegraError):
    """A computed check missed its tolerance."""


class _Context:
    def __init__(self, cfg: RunConfig, out: Path, quiet: bool):
        self.cfg = cfg
        self.task = cfg.task
        self.out = out
        self.quiet = quiet

    def path(self, name: str) -> Path:
        return self.out / name

    def report(self, summary: dict) -> None:
        if self.quiet:
            return
        if self.cfg.output.format == "json":
            import json

            from .io import to_jsonable

            print(json.dumps(to_jsonable(summary), indent=2, sort_keys=True))
        else:
            for k in sorted(summary):
                print(f"{k}: {summary[k]}")


# -- model helpers --------------------------------------------------------------


def _measure(ctx: _Context) -> SignedMatrixMeasure:
    model = ctx.cfg.model
    if model.measure is not None:
        return build_measure(model.measure)
    if model.mcarma is not None:
        return msdde_from_mcarma(build_mcarma(model.mcarma))
    raise ConfigError("model: this subcommand needs model.measure or model.mcarma")


def _tol(ctx: _Context, default: float) -> float:
    return ctx.task.tol if ctx.task.tol is not None else default


def _kernel(ctx: _Context, measure, structure):
    step = ctx.task.step or default_step(measure)
    horizon = ctx.task.horizon or truncation_horizon(measure)
    return solve_kernel(measure, structure, step, horizon)


def _xi(ctx: _Context, structure) -> np.ndarray:
    n = structure.dim
    if ctx.task.xi is None:
        return np.zeros(n)
    xi = np.asarray(ctx.task.xi, dtype=float)
    if xi.shape != (n,):
        raise ConfigError(f"task.xi: expected {n} entries, got {xi.size}")
    return project_xi(structure, xi)


def _directions(ctx: _Context, structure) -> list[np.ndarray]:
    n = structure.dim
    if ctx.task.directions:
        dirs = [np.asarray(d, dtype=float) for d in ctx.task.directions]
        for i, d in enumerate(dirs):
            if d.shape != (n,):
                raise ConfigError(f"task.directions.{i}: expected {n} entries")
        return dirs
    # coordinate axes, then the cointegrating vectors
    return list(np.eye(n)) + [structure.beta[:, j] for j in range(structure.rank_r)]


def _default_lag_cap(measure: SignedMatrixMeasure, step: float, tail_tol: float = 1e-6) -> int:
    last = max((t for t, _ in measure.atoms), default=0.0)
    lags = int(np.floor(last / step + 0.5)) + 1
    d = measure.density
    if isinstance(d, MatExpDensity) and d.order:
        total = d.total()
        L = max(lags, 8)
        while np.linalg.norm(total - d.integral((L - 0.5) * step), 2) > tail_tol:
            L *= 2
        lo, hi = L // 2, L
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if np.linalg.norm(total - d.integral((mid - 0.5) * step), 2) > tail_tol:
                lo = mid
            else:
                hi = mid
        lags = max(lags, hi)
    elif measure.has_density:
        lags = max(lags, int(np.ceil(measure.support_end() / step)) + 1)
    return lags


# -- subcommands ----------------------------------------------------------------


def cmd_analyze(ctx: _Context) -> int:
    measure = _measure(ctx)
    cf = CharacteristicFunction(measure)
    rep = check_conditions(cf, rank_tol=ctx.task.rank_tol)
    out: dict = {"conditions": rep.to_dict(), "decay_rate": measure.decay_rate}
    status = 0
    if rep.verdict != REJECTED:
        st = cointegration_structure(cf, ctx.task.rank_tol)
        out["structure"] = st.to_dict()
        if rep.zero_at_origin:
            residue = c0_residue_numeric(cf)
            diff = float(np.abs(residue - st.c0).max())
            tol = _tol(ctx, 1e-8)
            out["c0_residue"] = residue
            out["c0_route_difference"] = diff
            out["c0_routes_agree"] = diff <= tol
            if diff > tol:
                status = 1
    write_json(ctx.path("report.json"), out)
    ctx.report({"verdict": rep.verdict, "rank": out.get("structure", {}).get("rank_r")})
    if status:
        raise VerificationFailure(f"C0 routes differ by {out['c0_route_difference']:.3g}")
    return 0


def cmd_kernel(ctx: _Context) -> int:
    measure = _measure(ctx)
    cf = CharacteristicFunction(measure)
    st = cointegration_structure(cf, ctx.task.rank_tol)
    k = _kernel(ctx, measure, st)
    header, rows = k.csv_rows()
    write_csv(ctx.path("kernel.csv"), header, rows)
    tol = _tol(ctx, 1e-5)
    zs = [complex(a, b) for a, b in ctx.task.z_samples]
    check = laplace_check(k, cf, zs, tol)
    c0_dev = float(np.abs(np.eye(measure.dim) - integral_of_f(k, measure) - st.c0).max())
    check.update(
        {
            "step": k.step,
            "horizon": k.horizon,
            "truncation_error_bound": k.truncation_error_bound,
            "c0_from_integral_deviation": c0_dev,
            "derivative_consistency": k.derivative_consistency(),
        }
    )
    write_json(ctx.path("laplace_check.json"), check)
    ctx.path("kernel.gp").write_text(plotting.kernel_gnuplot("kernel.csv", k.dim))
    plotting.kernel_png(ctx.path("kernel.png"), k)
    ctx.report({"max_dev_f": check["max_dev_f"], "max_dev_c": check["max_dev_c"], "pass": check["pass"]})
    if not check["pass"]:
        raise VerificationFailure(f"Laplace identities deviate beyond {tol:g}")
    return 0


def cmd_simulate(ctx: _Context) -> int:
    if ctx.task.seed is None:
        raise ConfigError("task.seed: required for simulate (set it in the config or pass --seed)")
    seed = ctx.task.seed
    measure = _measure(ctx)
    cf = CharacteristicFunction(measure)
    rep = check_conditions(cf, rank_tol=ctx.task.rank_tol)
    if rep.verdict == REJECTED:
        raise VerificationFailure("the model is Rejected; no stationary-increment solution to simulate")
    st = cointegration_structure(cf, ctx.task.rank_tol)
    k = _kernel(ctx, measure, st)
    model = build_levy(ctx.task.levy, measure.dim)
    xi = _xi(ctx, st)
    ens = simulate_ensemble(k, st, model, ctx.task.paths, ctx.task.t_max, seed, xi, ctx.task.burn)

    i0 = ens[0].index(0.0)
    n = measure.dim
    rows = []
    for p in ens:
        block = np.column_stack([np.full(len(p.times) - i0, p.path_id), p.times[i0:], p.X[i0:]])
        rows.extend(block)
    write_csv(ctx.path("paths.csv"), ["path_id", "t"] + [f"X_{i + 1}" for i in range(n)], rows)

    dirs = _directions(ctx, st)
    labels = [f"d{i}" for i in range(len(dirs))]
    var_rows, profiles, slopes, expected = [], {}, {}, {}
    long_run = st.c0 @ model.sigma @ st.c0.T
    for i, (label, g) in enumerate(zip(labels, dirs)):
        times, var, slope = variance_profile(ens, g)
        var_rows.extend(np.column_stack([times, np.full(len(times), i), var]))
        profiles[label] = var
        slopes[label] = slope
        expected[label] = float(g @ long_run @ g)
    write_csv(ctx.path("variance.csv"), ["t", "direction_label", "variance"], var_rows)

    rng = np.random.default_rng([seed, 1])
    horizon_idx = int(round(k.horizon / k.step))
    grid = np.arange(max(i0, horizon_idx), len(ens[0].times))
    residuals = []
    if len(grid) >= 2:
        for _ in range(ctx.task.ecf_pairs):
            a, b = np.sort(rng.choice(grid, 2, replace=False))
            p = ens[0]
            residuals.append(ecf_residual(p, measure, p.times[a], p.times[b]))
    rms = float(np.sqrt(np.mean(np.sum(np.square(residuals), axis=1)))) if residuals else None
    ecf = {
        "seed": seed,
        "paths": len(ens),
        "step": k.step,
        "kernel_horizon": k.horizon,
        "truncation_error_bound": k.truncation_error_bound,
        "ecf_pairs": len(residuals),
        "ecf_rms_residual": rms,
        "directions": {label: {"gamma": g, "slope": slopes[label], "expected_slope": expected[label]} for label, g in zip(labels, dirs)},
        "verdict": rep.verdict,
    }
    write_json(ctx.path("ecf.json"), ecf)
    named = [f"{lab} = ({', '.join('%g' % x for x in g)})" for lab, g in zip(labels, dirs)]
    ctx.path("variance.gp").write_text(plotting.variance_gnuplot("variance.csv", named))
    plotting.variance_png(ctx.path("variance.png"), ens[0].times[i0:] - ens[0].times[i0], profiles, slopes)
    plotting.paths_png(ctx.path("paths.png"), ens, limit=3)
    ctx.report({"paths": len(ens), "ecf_rms_residual": rms, "slopes": slopes})
    return 0


def cmd_mcarma(ctx: _Context) -> int:
    if ctx.cfg.model.mcarma is None:
        raise ConfigError("model.mcarma: required for the mcarma subcommand")
    spec = build_mcarma(ctx.cfg.model.mcarma)
    tol = _tol(ctx, 1e-8)
    conditions = check_cointegrated_conditions(spec, ctx.task.rank_tol)
    measure = msdde_from_mcarma(spec, verify=True, tol=tol)
    write_json(ctx.path("measure.json"), {"model": {"measure": measure_to_config(measure)}})
    cf = CharacteristicFunction(measure)
    c0_carma = carma_c0(spec, ctx.task.rank_tol)
    c0_spectral = cointegration_structure(cf, ctx.task.rank_tol).c0
    c0_residue = c0_residue_numeric(cf)
    fourier = fourier_identity_error(spec, measure)
    diffs = {
        "carma_vs_spectral": float(np.abs(c0_carma - c0_spectral).max()),
        "carma_vs_residue": float(np.abs(c0_carma - c0_residue).max()),
    }
    ok = fourier <= tol and diffs["carma_vs_spectral"] <= tol and diffs["carma_vs_residue"] <= tol
    write_json(
        ctx.path("c0_report.json"),
        {
            "conditions": conditions,
            "fourier_identity_error": fourier,
            "c0_mcarma": c0_carma,
            "c0_spectral": c0_spectral,
            "c0_residue": c0_residue,
            "differences": diffs,
            "tol": tol,
            "pass": ok,
        },
    )
    ctx.report({"conditions_pass": conditions["all_pass"], "fourier_identity_error": fourier, **diffs})
    if not ok:
        raise VerificationFailure("MCARMA long-run matrix or Fourier identity outside tolerance")
    return 0


def cmd_var_oracle(ctx: _Context) -> int:
    if ctx.cfg.model.var is None:
        raise ConfigError("model.var: required for the var-oracle subcommand")
    if ctx.task.seed is None:
        raise ConfigError("task.seed: required for var-oracle (set it in the config or pass --seed)")
    spec = build_var(ctx.cfg.model.var)
    rep = var_granger(spec, tol=_tol(ctx, 1e-12))
    header, rows = rep.csv_rows()
    write_csv(ctx.path("granger.csv"), header, rows)
    n = spec.dim
    xi = np.zeros(n) if ctx.task.xi is None else rep.beta_perp @ (rep.beta_perp.T @ np.asarray(ctx.task.xi, float))
    sim = simulate_var(spec, rep, xi, ctx.task.var_length, ctx.task.seed)
    rng = np.random.default_rng([ctx.task.seed, 2])
    zs = 0.9 * np.sqrt(rng.uniform(size=16)) * np.exp(2j * np.pi * rng.uniform(size=16))
    identity = max(series_identity_error(spec, rep, z) for z in zs)
    pi0, _ = var_ecf(spec)
    null = float(np.abs(pi0 @ rep.c0_disc).max())
    ok = sim["pass"] and identity <= rep.tail_bound + 1e-10 and null <= 1e-10
    write_json(
        ctx.path("var_check.json"),
        {
            "rank": rep.rank_r,
            "terms": rep.J + 1,
            "tail_bound": rep.tail_bound,
            "spectral_radius": rep.rho,
            "recursion_vs_granger": sim["max_deviation"],
            "deviation_bound": sim["bound"],
            "series_identity_error": identity,
            "null_space_error": null,
            "pass": ok,
        },
    )
    ctx.report({"terms": rep.J + 1, "recursion_vs_granger": sim["max_deviation"], "pass": ok})
    if not ok:
        raise VerificationFailure("VAR Granger representation failed its checks")
    return 0


def cmd_bridge(ctx: _Context) -> int:
    measure = _measure(ctx)
    step = ctx.task.step or 1e-2
    lag_cap = ctx.task.lag_cap or _default_lag_cap(measure, step)
    spec = discretization_bridge(measure, step, lag_cap)
    angles = cointegration_angles(measure, spec)
    roots = root_mapping(measure, spec, step, 5)
    write_json(
        ctx.path("bridge.json"),
        {
            "step": step,
            "lag_cap": lag_cap,
            "var_order": spec.p,
            "principal_angles": angles,
            "root_mapping": roots,
        },
    )
    plotting.roots_png(ctx.path("roots.png"), roots["roots"], step)
    ctx.report({"var_order": spec.p, "max_angle": float(np.max(angles, initial=0.0)), "root_deviation": roots["max_deviation"]})
    return 0


def cmd_verify(ctx: _Context, only=None) -> int:
    from .acceptance import run_suite

    results = run_suite(only, echo=None if ctx.quiet else print)
    write_json(ctx.path("acceptance.json"), {"criteria": [r.to_dict() for r in results]})
    failed = [r for r in results if not r.passed]
    if failed:
        names = ", ".join(f"{r.number} ({r.title})" for r in failed)
        raise VerificationFailure(f"failed criteria: {names}")
    return 0


HANDLERS = {
    "analyze": cmd_analyze,
    "kernel": cmd_kernel,
    "simulate": cmd_simulate,
    "mcarma": cmd_mcarma,
    "var-oracle": cmd_var_oracle,
    "bridge": cmd_bridge,
}


# -- entry ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cointegra", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "verify", help="JSON config path or fixture:NAME")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, help="overrides task.seed")
        p.add_argument("--tol", type=float, help="overrides task.tol")
        p.add_argument("--quiet", action="store_true", help="write artifacts only")
        if name == "verify":
            p.add_argument("--only", help="comma-separated criterion numbers")
    return parser


def _load(spec: str | None) -> RunConfig:
    if spec is None:
        return RunConfig.model_validate({"model": {"measure": {"dim": 1}}})
    if spec.startswith("fixture:"):
        name = spec.split(":", 1)[1]
        if name not in NAMES:
            raise ConfigError(f"unknown fixture {name!r}; choose from {', '.join(NAMES)}")
        return parse_config(fixture_text(name), spec)
    return load_config(spec)


def _override(cfg: RunConfig, args) -> RunConfig:
    task = cfg.task.model_dump()
    if args.seed is not None:
        task["seed"] = args.seed
    if args.tol is not None:
        task["tol"] = args.tol
    try:
        return RunConfig.model_validate({**cfg.model_dump(), "task": task})
    except Exception as exc:
        raise ConfigError(f"command-line override: {exc}") from exc


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = _override(_load(args.config), args)
        out = Path(args.out or cfg.output.dir)
        out.mkdir(parents=True, exist_ok=True)
        ctx = _Context(cfg, out, args.quiet)
        if args.command == "verify":
            only = None
            if args.only:
                try:
                    only = {int(x) for x in args.only.split(",") if x.strip()}
                except ValueError as exc:
                    raise ConfigError(f"--only: {exc}") from exc
            return cmd_verify(ctx, only)
        return HANDLERS[args.command](ctx)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except VerificationFailure as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 1
    except CointegraError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
