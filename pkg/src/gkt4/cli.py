"""Command-line surface: init, deform, flow, verify, functional, report.

Exit codes: 0 on success, 1 on a failed verify or a runtime stop such as
positivity loss, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import sys

from . import io as gio
from .errors import GKError, PositivityLoss
from .grid import PeriodicGrid


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gkt4",
        description="Generalized Kahler laboratory on the flat 4-torus",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("init", help="write a flat hyper-Kahler snapshot")
    sp.add_argument("--out", required=True)
    sp.add_argument("--grid", default="32,32,1,1", help="N0,N1,N2,N3")
    sp.add_argument("--scheme", default="spectral", choices=["spectral", "fd4"])

    sp = sub.add_parser("deform", help="apply a Joyce-type Hamiltonian isotopy")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--config", default=None)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("flow", help="run generalized Kahler-Ricci flow")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--config", default=None)
    sp.add_argument("--csv", required=True)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("verify", help="run the identity battery")
    sp.add_argument("--in", dest="inp", default=None)
    sp.add_argument(
        "--suite", default=None, choices=["pointwise", "field", "flow"]
    )
    sp.add_argument("--trace", default=None, help="diagnostics CSV for --suite flow")
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--count", type=int, default=1000)
    sp.add_argument("--rows", default=None, help="also write machine-readable rows")

    sp = sub.add_parser("functional", help="print the functional report")
    sp.add_argument("--in", dest="inp", required=True)

    sp = sub.add_parser("report", help="render figures from a diagnostics CSV")
    sp.add_argument("--csv", required=True)
    sp.add_argument(
        "--outdir", default=None, help="defaults to the directory of the CSV"
    )
    sp.add_argument("--format", default="png", choices=["png", "pdf", "svg"])
    return p


def _cmd_init(args) -> int:
    from .state import flat_hyperkahler

    dims = tuple(int(x) for x in args.grid.split(","))
    state = flat_hyperkahler(PeriodicGrid(dims, scheme=args.scheme))
    gio.save_snapshot(state, args.out)
    print(f"wrote flat hyper-Kahler snapshot {args.out} (grid {dims})")
    return 0


def _cmd_deform(args) -> int:
    from .deform import joyce_deform

    cfg = gio.parse_config(args.config)
    state = gio.load_snapshot(args.inp, scheme=cfg.scheme)
    gen = gio.make_generator(cfg, state)
    try:
        out = joyce_deform(state, gen, cfg.deform_t_end, cfg.deform_dt)
    except PositivityLoss as exc:
        print(f"PositivityLoss: {exc} (reached t={exc.reached_time:.6g})")
        return 1
    gio.save_snapshot(out, args.out)
    print(
        f"deformed to t={out.t:.6g}; positivity margin {out.positivity_margin:.6g}; "
        f"lambda {out.lam:.3e}"
    )
    return 0


def _cmd_flow(args) -> int:
    from .flow import run

    cfg = gio.parse_config(args.config)
    state = gio.load_snapshot(args.inp, scheme=cfg.scheme)

    callback = None
    if cfg.checkpoint_stride > 0:
        def callback(row_index, st):
            if row_index % cfg.checkpoint_stride == 0:
                gio.save_snapshot(st, f"{args.out}.ck{row_index}")

    try:
        trace = run(state, cfg.flow_config(), row_callback=callback)
    except PositivityLoss as exc:
        print(f"PositivityLoss: {exc}")
        return 1
    gio.write_diagnostics_csv(trace.records, args.csv)
    gio.save_snapshot(trace.final_state, args.out)
    last = trace.records[-1]
    print(
        f"flow finished: {trace.termination} at t={last.t:.6g}; "
        f"sup|Phi-lambda|={last.sup_phi_dev:.3e}; rows={len(trace.records)}"
    )
    worst_heat = max(r.heat_residual for r in trace.records)
    if worst_heat > cfg.heat_warn:
        print(f"warning: heat residual {worst_heat:.3e} exceeds {cfg.heat_warn:.1e}")
    if trace.termination == "PositivityLoss":
        return 1
    return 0


def _cmd_verify(args) -> int:
    from .verify import run_field_suite, run_flow_suite, run_pointwise_suite

    reports = []
    suites = [args.suite] if args.suite else ["pointwise", "field"]
    for suite in suites:
        if suite == "pointwise":
            reports.append(("pointwise", run_pointwise_suite(args.seed, args.count)))
        elif suite == "field":
            if args.inp is None:
                print("verify: --in is required for the field suite", file=sys.stderr)
                return 2
            state = gio.load_snapshot(args.inp)
            reports.append(("field", run_field_suite(state)))
        elif suite == "flow":
            if args.trace is None:
                print("verify: --trace is required for the flow suite", file=sys.stderr)
                return 2
            records = gio.read_diagnostics_csv(args.trace)
            reports.append(("flow", run_flow_suite(records)))
    ok = True
    rows = ["suite,check,residual,threshold,pass"]
    for name, rep in reports:
        print(f"== {name} suite ==")
        print(rep.to_text())
        print()
        rows.extend(f"{name},{r}" for r in rep.to_rows())
        ok = ok and rep.passed
    if args.rows is not None:
        from .io import _atomic_write

        _atomic_write(args.rows, ("\n".join(rows) + "\n").encode("ascii"))
    return 0 if ok else 1


def _cmd_functional(args) -> int:
    from .functionals import functional_report

    state = gio.load_snapshot(args.inp)
    rep = functional_report(state)
    print(f"lambda      = {rep.lam:.17g}")
    print(f"F_value     = {rep.F_value:.17g}")
    print(f"dF_dt       = {rep.dF_dt:.17g}")
    print(f"energy_rhs  = {rep.energy_rhs:.17g}")
    print(f"mu_l2       = {rep.mu_l2:.17g}")
    print(f"gscal_mean  = {rep.gscal_mean:.17g}")
    return 0


def _cmd_report(args) -> int:
    import os

    from .report import render_figures

    outdir = args.outdir
    if outdir is None:
        outdir = os.path.dirname(os.path.abspath(args.csv))
    records = gio.read_diagnostics_csv(args.csv)
    written = render_figures(records, outdir, args.format)
    for path in written:
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2
    handlers = {
        "init": _cmd_init,
        "deform": _cmd_deform,
        "flow": _cmd_flow,
        "verify": _cmd_verify,
        "functional": _cmd_functional,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except GKError as exc:
        kind = type(exc).__name__
        print(f"{kind}: {exc}", file=sys.stderr)
        from .errors import ConfigError, FormatMismatch, IoFailure

        if isinstance(exc, ConfigError):
            return 2
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
