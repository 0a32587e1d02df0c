"""Command-line interface.

Subcommands:

* ``tcs``          -- moments and free-evolution variance curve as CSV
* ``repeat``       -- run a repeated-measurement config, emit report + trial log
* ``sweep``        -- contractive sweep over the twist, emit ratio table
* ``dilate-demo``  -- dilate a Kraus measure file, emit the realization

Report paths write figures (PNG) alongside the delimited output unless
``--no-figures`` is given.  Exit codes: 0 success, 2 configuration or
input error, 3 numerical-guard failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiment, models, opmeasure, tcs
from .errors import InputError, NumericalGuardError
from .grid import Grid, discretize, free_evolve, quadrature_moments
from .tcs import contraction_time, make_tcs, moments, position_variance_at


def _parse_complex(text: str) -> complex:
    return experiment._parse_complex(text)


def _parse_float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freemass",
        description="Repeated position measurement of a free mass: "
                    "contractive states and the standard quantum limit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_tcs = sub.add_parser("tcs", help="moments and variance curve as CSV")
    p_tcs.add_argument("--mu", type=_parse_complex, required=True)
    p_tcs.add_argument("--nu", type=_parse_complex, required=True)
    p_tcs.add_argument("--omega", type=float, default=1.0)
    p_tcs.add_argument("--mass", type=float, default=1.0)
    p_tcs.add_argument("--hbar", type=float, default=1.0)
    p_tcs.add_argument("--t-max", type=float, default=None,
                       help="curve end time (default: 3x contraction time, or 3)")
    p_tcs.add_argument("--points", type=int, default=121)
    p_tcs.add_argument("--grid-check", action="store_true",
                       help="add a grid-propagated variance column")
    p_tcs.add_argument("--output", type=Path, default=None,
                       help="CSV file (default: stdout)")
    p_tcs.add_argument("--no-figures", action="store_true")

    p_rep = sub.add_parser("repeat", help="run a repeated-measurement config")
    p_rep.add_argument("--config", type=Path, required=True)
    p_rep.add_argument("--trials", type=int, default=None,
                       help="override [run] trials")
    p_rep.add_argument("--outdir", type=Path, default=None,
                       help="write report.txt, trials.csv, figures here "
                            "(default: report to stdout)")
    p_rep.add_argument("--no-figures", action="store_true")

    p_sweep = sub.add_parser("sweep", help="sweep the twist, tabulate sql_ratio")
    p_sweep.add_argument("--xi", type=_parse_float_list, required=True,
                         help="comma-separated twist values")
    p_sweep.add_argument("--at-contraction-time", action="store_true",
                         help="evaluate each twist at its contraction time")
    p_sweep.add_argument("--tau", type=_parse_float_list, default=None,
                         help="comma-separated times (alternative to "
                              "--at-contraction-time)")
    p_sweep.add_argument("--output", type=Path, default=None,
                         help="CSV file (default: stdout)")
    p_sweep.add_argument("--no-figures", action="store_true")

    p_dil = sub.add_parser("dilate-demo",
                           help="dilate a Kraus measure file to a probe model")
    p_dil.add_argument("--input", type=Path, required=True,
                       help="plain-text Kraus measure file")
    p_dil.add_argument("--output", type=Path, default=None,
                       help="realization file (default: <input>.realization.txt)")
    return parser


def _cmd_tcs(args) -> int:
    params = make_tcs(args.mu, args.nu, omega=args.omega, mass=args.mass,
                      hbar=args.hbar)
    twist = tcs.xi(params)
    m = moments(params)
    t_max = args.t_max
    tau = contraction_time(params) if twist > 0 else None
    if t_max is None:
        t_max = 3.0 * tau if tau is not None else 3.0
    times = np.linspace(0.0, t_max, args.points)
    variances = position_variance_at(params, times)

    grid_column = None
    if args.grid_check:
        spread = max(np.sqrt(variances.max()), np.sqrt(m.var_p) * t_max / args.mass)
        half = max(12.0 * spread, 40.0)
        state = discretize(params, Grid(-half, half, 4096))
        grid_column = np.array([
            quadrature_moments(free_evolve(state, float(t))).var_x for t in times])

    lines = [
        f"# xi {twist:.12g}",
        f"# mean_x {m.mean_x:.12g}",
        f"# mean_p {m.mean_p:.12g}",
        f"# var_x {m.var_x:.12g}",
        f"# var_p {m.var_p:.12g}",
        f"# correlation {m.correlation:.12g}",
        f"# mean_energy {m.mean_energy:.12g}",
        f"# contraction_time {'na' if tau is None else f'{tau:.12g}'}",
        "t,var_x" + (",var_x_grid" if grid_column is not None else ""),
    ]
    for i, t in enumerate(times):
        row = f"{t:.12g},{variances[i]:.12g}"
        if grid_column is not None:
            row += f",{grid_column[i]:.12g}"
        lines.append(row)
    text = "\n".join(lines) + "\n"

    if args.output is None:
        sys.stdout.write(text)
    else:
        args.output.write_text(text, encoding="ascii")
        if not args.no_figures:
            from . import plots
            figure = args.output.with_suffix(".png")
            plots.save_variance_curve(figure, times, variances,
                                      contraction_time=tau,
                                      grid_check=grid_column)
            print(f"wrote {args.output} and {figure}")
        else:
            print(f"wrote {args.output}")
    return 0


def _cmd_repeat(args) -> int:
    config = experiment.load_config(args.config)
    if args.trials is not None:
        import dataclasses
        config = dataclasses.replace(config, trials=args.trials)
    report = experiment.run_config(config)
    text = experiment.render_report(report, config.digest())

    if args.outdir is None:
        sys.stdout.write(text)
        return 0
    args.outdir.mkdir(parents=True, exist_ok=True)
    report_path = args.outdir / "report.txt"
    report_path.write_text(text, encoding="ascii")
    written = [report_path]
    if report.trials > 0:
        trial_path = args.outdir / "trials.csv"
        experiment.write_trial_log(report, trial_path)
        written.append(trial_path)
    if not args.no_figures:
        written.extend(_repeat_figures(args.outdir, config, report))
    print("wrote " + ", ".join(str(p) for p in written))
    return 0


def _repeat_figures(outdir: Path, config, report) -> list[Path]:
    from . import plots
    model = experiment.build_model(config)
    prior = experiment.build_prior(config)
    written = []
    if report.trials > 0:
        density = models.readout_density(model, prior)
        path = plots.save_readout_histogram(
            outdir / "readout_hist.png", report.first_readouts,
            config.readout_bins, density_x=config.grid.points(),
            density_y=density)
        written.append(path)
    if isinstance(model, models.VonNeumannModel):
        table = models.readout_moment_table(model, prior)
        evolved = experiment._evolved_variance(
            table.var_x, table.correlation, table.var_p, report.tau, config.mass)
        path = plots.save_predictive_profile(
            outdir / "predictive_profile.png", table.readouts, evolved,
            report.precision_avg, report.sql_bound, mask=table.retained)
        written.append(path)
    else:
        times = np.linspace(0.0, 2.0 * report.tau, 121)
        curve = position_variance_at(model.params, times)
        path = plots.save_variance_curve(
            outdir / "posterior_variance.png", times, curve,
            contraction_time=report.tau)
        written.append(path)
    return written


def _cmd_sweep(args) -> int:
    if args.tau is None and not args.at_contraction_time:
        raise InputError("sweep needs --at-contraction-time or --tau")
    if args.tau is not None and args.at_contraction_time:
        raise InputError("--tau and --at-contraction-time are exclusive")
    rows = experiment.sweep_contraction(args.xi, tau_values=args.tau)
    text = experiment.sweep_csv(rows)
    if args.output is None:
        sys.stdout.write(text)
    else:
        args.output.write_text(text, encoding="ascii")
        if not args.no_figures:
            from . import plots
            figure = args.output.with_suffix(".png")
            plots.save_sweep(figure, rows)
            print(f"wrote {args.output} and {figure}")
        else:
            print(f"wrote {args.output}")
    return 0


def _cmd_dilate_demo(args) -> int:
    om = opmeasure.read_operation_measure(args.input)
    realization = opmeasure.dilate(om)
    rng = np.random.default_rng(0)
    residual = 0.0
    for _ in range(8):
        v = rng.normal(size=om.dim) + 1j * rng.normal(size=om.dim)
        v /= np.linalg.norm(v)
        probs, posts = opmeasure.realization_statistics(realization, v)
        rho = opmeasure.DensityOperator.pure(v)
        for a in om.outcomes:
            residual = max(residual,
                           abs(probs[a] - opmeasure.probability(om, a, rho)))
            if a in posts:
                direct = opmeasure.posterior(om, a, rho)
                residual = max(residual, float(np.max(np.abs(
                    posts[a].matrix - direct.matrix))))
    output = args.output or args.input.with_suffix(".realization.txt")
    opmeasure.write_realization(output, realization,
                                roundtrip_residual=residual)
    unitary = realization.unitary
    defect = float(np.max(np.abs(unitary.conj().T @ unitary
                                 - np.eye(unitary.shape[0]))))
    print(f"object_dim {om.dim}")
    print(f"probe_dim {realization.probe_dim}")
    print(f"unitarity_defect {defect:.6e}")
    print(f"roundtrip_residual {residual:.6e}")
    print(f"wrote {output}")
    return 0


_COMMANDS = {
    "tcs": _cmd_tcs,
    "repeat": _cmd_repeat,
    "sweep": _cmd_sweep,
    "dilate-demo": _cmd_dilate_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalGuardError as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
