"""Command-line front end: design, sense, recover, sweep, pipeline.

Exit codes: 0 success, 2 usage or validation error, 3 I/O or format error,
4 solver did not converge (results are still written).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .basis import SparsityBasis
from .errors import CSFilterError, FormatError
from .experiments import (
    REAL_SAMPLE_RATE_HZ,
    TrialSpec,
    phase_transition,
    plant_signal,
)
from .filter_bank import (
    FilterSpec,
    bank_from_dict,
    build_band_plan,
    per_bin_band_plan,
    save_bank,
    write_bank_csv,
)
from .recovery import SolverConfig, l0_oracle, solve_l1, solve_omp
from .sensing import (
    SensingOperator,
    apply_forward,
    assemble_filterbank_transfer,
    assemble_ideal_transfer,
    load_operator,
    make_mask,
    operator_from_dict,
    save_operator,
)
from .signal_io import read_signal, write_signal

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NOT_CONVERGED = 0, 2, 3, 4
L0_MAX_N = 20
SCHEME_FLAGS = {"grid": "uniform_grid", "random": "random_subset"}


class ValidationError(CSFilterError):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _existing(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"input file not found: {p}")
    return p


def _outdir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_design(args) -> int:
    if args.f_lo > args.f_hi:
        raise ValidationError(f"--f-lo ({args.f_lo:g}) must not exceed --f-hi ({args.f_hi:g})")
    if args.grid_points < 2:
        raise ValidationError("--grid-points must be at least 2")
    plan = build_band_plan(args.f_hi, args.f_lo, args.step, args.delay_max, args.seed)
    spec = FilterSpec(args.order, args.ripple_db, float(plan.cutoffs_hz[0]))
    out = _outdir(args.out_dir)
    grid_max = args.grid_max if args.grid_max is not None else 2.0 * args.f_hi
    grid = np.linspace(0.0, grid_max, args.grid_points)
    save_bank(out / "bandplan.json", spec, plan)
    write_bank_csv(out / "responses.csv", spec, plan, grid)
    print(f"{plan.n_bands} sections, cutoffs {plan.cutoffs_hz[0]:g} .. {plan.cutoffs_hz[-1]:g} Hz -> {out}")
    return EXIT_OK


def _operator_for(args, n: int) -> SensingOperator:
    if args.operator is not None:
        try:
            doc = json.loads(_existing(args.operator).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{args.operator}: invalid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise FormatError(f"{args.operator}: expected a JSON object")
        if "transfer" in doc:
            op = operator_from_dict(doc)
            if op.n != n:
                raise FormatError(f"operator has n={op.n} but the signal has n={n}")
            return op
        spec, plan = bank_from_dict(doc)
        fs = args.sample_rate or 2.0 * plan.cutoffs_hz[0]
    else:
        fs = args.sample_rate or REAL_SAMPLE_RATE_HZ
        plan = per_bin_band_plan(n, fs, args.seed, args.center_hz)
        spec = FilterSpec()
    if args.mode == "ideal":
        transfer = assemble_ideal_transfer(n, plan, fs, args.center_hz)
    else:
        transfer = assemble_filterbank_transfer(n, plan, spec, fs, args.center_hz)
    if not 0 < args.rate_fraction <= 1:
        raise ValidationError("--rate-fraction must lie in (0, 1]")
    m = min(n, max(1, round(args.rate_fraction * n)))
    return SensingOperator(transfer, make_mask(n, m, SCHEME_FLAGS[args.scheme], args.seed))


def cmd_sense(args) -> int:
    x = read_signal(_existing(args.signal))
    op = _operator_for(args, x.size)
    y = apply_forward(op, x)
    if not np.iscomplexobj(x) and op.transfer.is_conjugate_symmetric:
        y = y.real
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_signal(out, y)
    op_out = Path(args.operator_out) if args.operator_out else out.with_suffix(".operator.json")
    save_operator(op_out, op)
    print(f"n={op.n} m={op.m} ({op.mask.scheme}) -> {out}, {op_out}")
    return EXIT_OK


def cmd_recover(args) -> int:
    y = read_signal(_existing(args.measurements))
    op = load_operator(_existing(args.operator))
    if y.size != op.m:
        raise FormatError(f"measurement file holds {y.size} samples, operator expects {op.m}")
    basis = SparsityBasis(args.basis, op.n)
    if args.solver == "l1":
        cfg = SolverConfig(args.lam, args.max_iters, args.tol if args.tol is not None else 1e-7)
        result = solve_l1(op, basis, y, cfg)
    elif args.solver == "omp":
        s_max = args.s_max if args.s_max is not None else max(1, op.m // 2)
        result = solve_omp(op, basis, y, s_max, args.tol if args.tol is not None else 1e-8)
    else:
        if op.n > L0_MAX_N:
            raise ValidationError(f"--solver l0 is limited to n <= {L0_MAX_N}, got n={op.n}")
        result = l0_oracle(op, basis, y, args.s_max if args.s_max is not None else 2)
    out = _outdir(args.out_dir)
    result.save(out / "result.json")
    x_hat = result.x_hat
    if basis.is_real and not np.any(np.iscomplex(y)) and op.transfer.is_conjugate_symmetric:
        x_hat = x_hat.real
    write_signal(out / "recovered.csf", x_hat)
    state = "converged" if result.converged else "NOT converged"
    print(f"{args.solver}: {state} after {result.iters} iterations, "
          f"|support|={len(result.support)}, residual={result.residual_l2:.3e}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_sweep(args) -> int:
    if not args.s_list or not args.m_list:
        raise ValidationError("--s-list and --m-list must be non-empty")
    report = phase_transition(
        args.n,
        args.s_list,
        args.m_list,
        args.trials,
        args.seed,
        basis=args.basis,
        mask_scheme=SCHEME_FLAGS[args.scheme],
        solver=args.solver,
        workers=args.workers,
    )
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    report.write_csv(prefix.with_suffix(".csv"))
    report.write_json(prefix.with_suffix(".json"))
    report.write_plot_data(prefix.parent, prefix.name)
    c = "n/a" if report.c is None else f"{report.c:.3f}"
    print(f"m90={report.m90} c={c} -> {prefix}.csv/.json")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    out = _outdir(args.out_dir)
    m = min(args.n, max(1, round(args.rate_fraction * args.n)))
    common = ["--seed", str(args.seed)]
    code = main(["design", "--order", str(args.order), "--ripple-db", str(args.ripple_db),
                 "--f-hi", repr(args.f_hi), "--f-lo", repr(args.f_lo), "--step", repr(args.step),
                 "--out-dir", str(out), *common])
    if code:
        return code
    trial = TrialSpec(args.n, args.S, m, basis=args.basis, seed=args.seed)
    alpha = plant_signal(trial)
    x = SparsityBasis(args.basis, args.n).synthesize(alpha)
    write_signal(out / "signal.csf", x.real if args.basis == "identity" else x)
    sense = ["sense", "--signal", str(out / "signal.csf"), "--out", str(out / "measurements.csf"),
             "--operator-out", str(out / "operator.json"), "--rate-fraction", repr(args.rate_fraction),
             "--scheme", args.scheme, "--mode", args.mode, *common]
    if args.use_bank:
        sense += ["--operator", str(out / "bandplan.json")]
    code = main(sense)
    if code:
        return code
    code = main(["recover", "--measurements", str(out / "measurements.csf"),
                 "--operator", str(out / "operator.json"), "--solver", args.solver,
                 "--basis", args.basis, "--out-dir", str(out)])
    if args.s_list and args.m_list:
        sweep_code = main(["sweep", "--n", str(args.n), "--s-list", ",".join(map(str, args.s_list)),
                           "--m-list", ",".join(map(str, args.m_list)), "--trials", str(args.trials),
                           "--basis", args.basis, "--out", str(out / "sweep"), *common])
        code = code or sweep_code
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csfilter", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="JSON file of option defaults; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    def design_flags(p):
        p.add_argument("--order", type=int, default=9)
        p.add_argument("--ripple-db", type=float, default=1.0)
        p.add_argument("--f-hi", type=float, default=4e9)
        p.add_argument("--f-lo", type=float, default=2e9)
        p.add_argument("--step", type=float, default=2e8)

    p = sub.add_parser("design", help="Chebyshev bank responses and band plan")
    design_flags(p)
    p.add_argument("--delay-max", type=float, default=None, help="seconds; default 1/step")
    p.add_argument("--grid-points", type=int, default=801)
    p.add_argument("--grid-max", type=float, default=None, help="Hz; default 2*f_hi")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("sense", help="apply the sensing operator to a CSF1 signal")
    p.add_argument("--signal", required=True)
    p.add_argument("--operator", help="band plan or sensing operator JSON; default per-bin plan")
    p.add_argument("--out", required=True)
    p.add_argument("--operator-out")
    p.add_argument("--mode", choices=("ideal", "filterbank"), default="ideal")
    p.add_argument("--rate-fraction", type=float, default=0.2)
    p.add_argument("--scheme", choices=tuple(SCHEME_FLAGS), default="grid")
    p.add_argument("--sample-rate", type=float, default=None)
    p.add_argument("--center-hz", type=float, default=None, help="complex baseband centre")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sense)

    p = sub.add_parser("recover", help="sparse recovery from CSF1 measurements")
    p.add_argument("--measurements", required=True)
    p.add_argument("--operator", required=True)
    p.add_argument("--solver", choices=("l1", "omp", "l0"), default="l1")
    p.add_argument("--basis", choices=("identity", "dft"), default="identity")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--s-max", type=int, default=None)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_recover)

    def sweep_flags(p, required):
        p.add_argument("--s-list", type=_int_list, required=required)
        p.add_argument("--m-list", type=_int_list, required=required)
        p.add_argument("--trials", type=int, default=100)

    p = sub.add_parser("sweep", help="phase-transition sweep over (S, m)")
    p.add_argument("--n", type=int, default=1024)
    sweep_flags(p, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--basis", choices=("identity", "dft"), default="identity")
    p.add_argument("--scheme", choices=tuple(SCHEME_FLAGS), default="random")
    p.add_argument("--solver", choices=("l1", "omp"), default="l1")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pipeline", help="design, plant, sense and recover in one go")
    design_flags(p)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--S", type=int, default=26)
    p.add_argument("--rate-fraction", type=float, default=0.2)
    p.add_argument("--scheme", choices=tuple(SCHEME_FLAGS), default="grid")
    p.add_argument("--mode", choices=("ideal", "filterbank"), default="ideal")
    p.add_argument("--basis", choices=("identity", "dft"), default="identity")
    p.add_argument("--solver", choices=("l1", "omp"), default="l1")
    p.add_argument("--use-bank", action="store_true", help="sense with the designed bank")
    sweep_flags(p, required=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_pipeline)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        config = json.loads(_existing(known.config).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{known.config}: invalid JSON ({exc})") from exc
    if not isinstance(config, dict):
        raise FormatError("config file must hold a JSON object")
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sub in action.choices.values():
                dests = {a.dest for a in sub._actions}
                sub.set_defaults(**{k: v for k, v in config.items() if k in dests})


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (FormatError, OSError) as exc:
        print(f"csfilter: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CSFilterError, ValueError) as exc:
        print(f"csfilter: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
