"""Batch front-end: config-driven subcommands producing deterministic CSV
tables and SQGF field files.

Exit codes: 0 success, 1 scientific failure (inequality / regression / gate),
2 validation error, 3 numerical failure (blow-up, non-convergence).
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import sqgf
from .config import RunConfig, load_config
from .dynamics import (
    EvolutionState,
    FULL,
    StepperConfig,
    SteadyState,
    evolve,
    make_steady,
    shear_steady_state,
)
from .errors import (
    BlowUpError,
    ConvergenceError,
    QuadratureError,
    SqgLabError,
    ValidationError,
)
from .growth import ExperimentConfig, GrowthRecord, epsilon_sweep, run_perturbation
from .linop import LinearOperator, SpectrumResult, rightmost_eigenpair
from .modulus import (
    ModulusParams,
    choose_B,
    empirical_modulus,
    verify_inequality,
)
from .spectral import (
    GridSpec,
    PhysicalField,
    SpectralField,
    forward,
    inverse,
    norm_l2,
    norm_linf,
    norm_linf_grad,
    to_values,
)

STEADY_RESIDUAL_GATE = 1e-10
SPECTRUM_RESIDUAL_GATE = 1e-8


def _fmt(x) -> str:
    if x is None:
        return "nan"
    return f"{float(x):.17g}"


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _write_text(path: Path, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _build_steady(cfg: RunConfig) -> SteadyState:
    grid = GridSpec(cfg.grid.n)
    if cfg.steady.kind == "shear":
        if cfg.steady.amplitude == 0.0:
            return make_steady(forward(PhysicalField(grid, np.zeros((grid.n, grid.n)))))
        return shear_steady_state(grid, cfg.steady.m, cfg.steady.amplitude)
    field = sqgf.read_field(cfg.steady.file)
    if field.grid.n != grid.n:
        raise ValidationError(
            f"custom steady field has n={field.grid.n}, config says n={grid.n}"
        )
    theta0 = forward(field)
    if not theta0.mean_free:
        raise ValidationError("custom steady field must be mean-free")
    return make_steady(theta0)


def _build_spectrum(cfg: RunConfig, steady: SteadyState) -> SpectrumResult:
    op = LinearOperator(steady)
    return rightmost_eigenpair(
        op,
        K=cfg.spectrum.K,
        method=cfg.spectrum.method,
        tau_pow=cfg.spectrum.tau_pow,
    )


def _spectrum_gate(res: SpectrumResult) -> bool:
    if res.method == "dense":
        return res.residual < SPECTRUM_RESIDUAL_GATE
    return res.propagator_residual < SPECTRUM_RESIDUAL_GATE and res.residual < 1e-3


def _write_field(path: Path, grid, values) -> None:
    sqgf.write_field(path, PhysicalField(grid, np.ascontiguousarray(values)))


def cmd_steady(cfg: RunConfig, out: Path) -> int:
    steady = _build_steady(cfg)
    residual = steady.residual_linf()
    g = steady.grid
    out.mkdir(parents=True, exist_ok=True)
    _write_field(out / "theta0.sqgf", g, inverse(steady.theta0).values)
    _write_field(out / "f.sqgf", g, inverse(steady.f).values)
    _write_field(out / "q0_1.sqgf", g, inverse(steady.q0[0]).values)
    _write_field(out / "q0_2.sqgf", g, inverse(steady.q0[1]).values)
    _write_text(
        out / "steady_report.txt",
        [
            f"n = {g.n}",
            f"residual_linf = {_fmt(residual)}",
            f"theta0_l2 = {_fmt(norm_l2(steady.theta0))}",
            f"f_linf = {_fmt(norm_linf(steady.f))}",
            f"grad_theta0_linf = {_fmt(norm_linf_grad(steady.theta0))}",
            f"gate = {'pass' if residual < STEADY_RESIDUAL_GATE else 'fail'}",
        ],
    )
    print(f"steady residual {residual:.3e} (gate {STEADY_RESIDUAL_GATE:g})")
    return 0 if residual < STEADY_RESIDUAL_GATE else 1


def cmd_spectrum(cfg: RunConfig, out: Path) -> int:
    steady = _build_steady(cfg)
    res = _build_spectrum(cfg, steady)
    out.mkdir(parents=True, exist_ok=True)
    order = np.lexsort((-res.eigenvalues.imag, -res.eigenvalues.real))
    _write_csv(
        out / "spectrum.csv",
        ["re", "im"],
        ((w.real, w.imag) for w in res.eigenvalues[order]),
    )
    g = steady.grid
    phi_vals = to_values(res.eigenfunction.coeffs, g.n)
    _write_field(out / "phi_re.sqgf", g, phi_vals.real)
    _write_field(out / "phi_im.sqgf", g, phi_vals.imag)
    _write_text(
        out / "spectrum_summary.txt",
        [
            f"method = {res.method}",
            f"truncation_K = {res.truncation}",
            f"mu = {_fmt(res.rightmost.real)} + {_fmt(res.rightmost.imag)}i",
            f"lambda = {_fmt(res.rightmost.real)}",
            f"residual = {_fmt(res.residual)}",
            f"propagator_residual = {_fmt(res.propagator_residual)}",
            f"iterations = {res.iterations}",
            f"gate = {'pass' if _spectrum_gate(res) else 'fail'}",
        ],
    )
    print(
        f"rightmost eigenvalue {res.rightmost:.8f}, residual {res.residual:.3e}"
        f" ({res.method})"
    )
    return 0 if _spectrum_gate(res) else 1


def cmd_evolve(cfg: RunConfig, out: Path) -> int:
    steady = _build_steady(cfg)
    g = steady.grid
    if cfg.time.initial is not None:
        init = forward(sqgf.read_field(cfg.time.initial))
        if init.grid.n != g.n:
            raise ValidationError("initial field grid does not match config grid")
        if not init.mean_free:
            raise ValidationError("initial field must be mean-free")
    else:
        init = steady.theta0.copy()
    state = EvolutionState(init, 0.0, steady, FULL)
    stepper = StepperConfig(cfl=cfg.time.cfl, dt_max=cfg.time.dt_max)
    result = evolve(
        state, cfg.time.t_max, stepper, observe_every=cfg.time.observe_every
    )
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out / "series.csv",
        ["t", "l2", "linf", "linf_grad", "hhalf", "energy_flux"],
        (
            (r["t"], r["l2"], r["linf"], r["linf_grad"], r["hhalf"], r["energy_flux"])
            for r in result.records
        ),
    )
    _write_field(out / "theta_final.sqgf", g, inverse(result.state.theta).values)
    print(f"evolved to t = {result.state.t:g} ({len(result.records)} records)")
    return 0


def _series_rows(rec: GrowthRecord):
    for i in range(rec.t.size):
        yield (
            rec.t[i],
            rec.l2[i],
            rec.linf_full[i],
            rec.linf_grad_full[i],
            rec.hhalf[i],
            rec.energy_flux[i],
            rec.duhamel_residual[i],
        )


_SERIES_HEADER = ["t", "l2", "linf", "linf_grad", "hhalf", "energy_flux", "duhamel_residual"]


def _run_one(args):
    config, eps = args
    return run_perturbation(config, eps)


def cmd_instability(cfg: RunConfig, out: Path, jobs: int) -> int:
    steady = _build_steady(cfg)
    spectrum = _build_spectrum(cfg, steady)
    lam = spectrum.rightmost.real
    if lam <= 0:
        print(
            f"rightmost eigenvalue {lam:.6f} <= 0: the steady state is "
            "spectrally stable, the escape-time experiment is vacuous"
        )
        return 1
    exp = ExperimentConfig(
        steady=steady,
        spectrum=spectrum,
        epsilons=list(cfg.experiment.epsilons),
        envelope_radius=cfg.experiment.R,
        threshold=cfg.experiment.threshold,
        observe_every=cfg.time.observe_every,
        stepper=StepperConfig(cfl=cfg.time.cfl, dt_max=cfg.time.dt_max),
    )
    if len(exp.epsilons) == 1:
        print("single epsilon: running one record, no regression")
        rec = run_perturbation(exp, exp.epsilons[0])
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / f"series_eps_{rec.epsilon:.3e}.csv", _SERIES_HEADER, _series_rows(rec))
        return 0
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_one, [(exp, e) for e in exp.epsilons]))
        report = epsilon_sweep(exp, records=records)
    else:
        report = epsilon_sweep(exp)
    out.mkdir(parents=True, exist_ok=True)
    for rec in report.records:
        _write_csv(out / f"series_eps_{rec.epsilon:.3e}.csv", _SERIES_HEADER, _series_rows(rec))
    _write_csv(
        out / "sweep.csv",
        ["epsilon", "lambda_hat", "escape_time", "escape_norm", "max_grad_linf"],
        (
            (r.epsilon, r.lambda_hat, r.escape_time, r.escape_norm, r.max_grad_linf)
            for r in report.records
        ),
    )
    rel_gap = abs(report.slope - 1.0 / lam) * lam
    _write_text(
        out / "sweep_summary.txt",
        [
            f"lambda_spectral = {_fmt(lam)}",
            f"slope = {_fmt(report.slope)}",
            f"one_over_lambda = {_fmt(1.0 / lam)}",
            f"slope_rel_gap = {_fmt(rel_gap)}",
            f"intercept = {_fmt(report.intercept)}",
            f"r_squared = {_fmt(report.r_squared)}",
            f"threshold = {_fmt(report.threshold)}",
            f"not_escaped = {report.not_escaped}",
            f"max_grad_linf = {_fmt(report.max_grad_linf)}",
        ],
    )
    print(
        f"escape-time slope {report.slope:.4f} vs 1/lambda {1.0 / lam:.4f} "
        f"(R^2 = {report.r_squared:.5f})"
    )
    return 0 if not report.not_escaped else 1


def cmd_modulus(cfg: RunConfig, out: Path, seed: int | None, trajectory: bool) -> int:
    steady = _build_steady(cfg)
    mo = cfg.modulus
    use_seed = mo.seed if seed is None else seed
    base = ModulusParams(
        delta_mod=mo.delta_mod, gamma_mod=mo.gamma_mod, B=1.0, A=mo.A, C_big=mo.Cbig
    )
    th_norms = (norm_linf(steady.theta0), norm_linf_grad(steady.theta0))
    f_norms = (norm_linf(steady.f), norm_linf_grad(steady.f))
    sel = choose_B(th_norms, f_norms, base, theta0=steady.theta0, seed=use_seed)
    out.mkdir(parents=True, exist_ok=True)
    if not sel.feasible:
        _write_text(
            out / "modulus_summary.txt",
            [
                "B = infeasible",
                f"minima = {sel.minima}",
                f"notes = {sel.notes}",
                "pass = false",
            ],
        )
        print(f"no representable B satisfies the selection conditions: {sel.notes}")
        return 1
    params = base.with_B(sel.B)
    report = verify_inequality(params, f_norms)
    _write_csv(
        out / "verification.csv",
        ["xi", "omega_B", "Omega_B", "M_B", "F_B", "lhs"],
        (
            (
                report.xi_grid[i],
                report.omega_vals[i],
                report.advection[i],
                report.dissipation[i],
                report.force[i],
                report.lhs[i],
            )
            for i in range(report.xi_grid.size)
        ),
    )
    # the gate requires both the verified inequality and a negative
    # long-range regime coefficient A*gamma + 1/(2pi) - 1/pi
    gate = report.passed and report.long_range_coefficient < 0
    lines = [
        f"B = {_fmt(sel.B)}",
        f"selection_minima = {sel.minima}",
        f"max_lhs = {_fmt(report.max_lhs)}",
        f"quadrature_error = {_fmt(report.quadrature_error)}",
        f"short_range_bracket_max = {_fmt(report.short_range_bracket_max)}",
        f"long_range_coefficient = {_fmt(report.long_range_coefficient)}",
        f"pass = {'true' if gate else 'false'}",
    ]
    code = 0 if gate else 1

    if trajectory:
        spectrum = _build_spectrum(cfg, steady)
        exp = ExperimentConfig(
            steady=steady,
            spectrum=spectrum,
            epsilons=list(cfg.experiment.epsilons),
            envelope_radius=cfg.experiment.R,
            threshold=math.inf,
            t_max=cfg.time.t_max,
            observe_every=cfg.time.observe_every,
            stepper=StepperConfig(cfl=cfg.time.cfl, dt_max=cfg.time.dt_max),
        )
        g = steady.grid
        ratios = []

        def watch(t, full_coeffs):
            r = empirical_modulus(
                SpectralField(g, full_coeffs), params, seed=use_seed
            )
            ratios.append((t, r))

        run_perturbation(exp, exp.epsilons[0], field_observer=watch)
        _write_csv(out / "trajectory.csv", ["t", "modulus_ratio"], ratios)
        worst = max(r for _, r in ratios)
        lines.append(f"trajectory_max_ratio = {_fmt(worst)}")
        lines.append(f"trajectory_pass = {'true' if worst < 1.0 else 'false'}")
        if worst >= 1.0:
            code = 1
        print(f"trajectory modulus ratio max {worst:.4f} over {len(ratios)} records")

    _write_text(out / "modulus_summary.txt", lines)
    print(
        f"B = {sel.B:.6g}, max lhs = {report.max_lhs:.4e} "
        f"({'pass' if report.passed else 'fail'})"
    )
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sqglab",
        description="Forced critical SQG laboratory: steady states, spectra, "
        "instability experiments, modulus verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("steady", "spectrum", "evolve", "instability", "modulus"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--jobs", type=int, default=1, help="parallel runs for sweeps")
        p.add_argument("--seed", type=int, default=None, help="64-bit sampler seed")
        if name == "modulus":
            p.add_argument(
                "--trajectory",
                action="store_true",
                help="re-check the empirical modulus along a perturbation run",
            )
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        out = Path(args.out) if args.out else Path(cfg.io.out_dir)
        if args.command == "steady":
            return cmd_steady(cfg, out)
        if args.command == "spectrum":
            return cmd_spectrum(cfg, out)
        if args.command == "evolve":
            return cmd_evolve(cfg, out)
        if args.command == "instability":
            return cmd_instability(cfg, out, args.jobs)
        return cmd_modulus(cfg, out, args.seed, args.trajectory)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except (BlowUpError, ConvergenceError, QuadratureError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except SqgLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
