"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from .equilibrium import find_equilibria
from .exceptions import ConfigError, NumericalError, ZoneMismatch
from .model import PRESETS, KernelKind, load_config, preset
from .simulate import classify_longterm, simulate_dirac, simulate_weak_gamma
from .spectrum import report_analytic, report_fft
from .stability import classify_region, physical_critical_delays
from .sweep import RAW_AXES, SweepAxis, SweepConfig, export_grid, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _common(p):
    p.add_argument("--config", help="network JSON file")
    p.add_argument("--preset", choices=PRESETS, help="built-in network (default wang-baseline)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="NAME=VALUE",
                   help="override a weight (slot name or W_GS/W_SG/W_CS/W_SC/W_CC); repeatable")
    p.add_argument("--kernel", choices=[k.value for k in KernelKind],
                   help="delay kernel (default: the network's own)")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coupledwc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("equilibrium", help="all equilibria found by multi-start Newton")
    _common(p)

    p = sub.add_parser("coeffs", help="(alpha, beta) and region at an equilibrium")
    _common(p)
    p.add_argument("--eq-index", type=int, default=0)

    p = sub.add_parser("critical-delay", help="Hopf critical delays in ms")
    _common(p)
    p.add_argument("--eq-index", type=int, default=0)
    p.add_argument("--k-max", type=int, default=8)

    p = sub.add_parser("sweep", help="two-parameter grid sweep")
    _common(p)
    p.add_argument("--axis1", required=True, metavar="NAME:MIN:MAX:STEPS")
    p.add_argument("--axis2", required=True, metavar="NAME:MIN:MAX:STEPS")
    p.add_argument("--kernels", help="comma-separated kernels (overrides --kernel), e.g. dirac,weak-gamma")
    p.add_argument("--tau-bar", type=float, help="time constant in ms for raw alpha/beta sweeps")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("simulate", help="integrate the delayed network")
    _common(p)
    p.add_argument("--T", dest="T", type=float, help="(mean) delay in ms (default: network's)")
    p.add_argument("--horizon", type=float, help="ms")
    p.add_argument("--dt", type=float, help="ms")
    p.add_argument("--init", type=float, nargs="+", default=[0.0, 0.0, 0.0, 0.0],
                   help="4 reals (X) or 8 reals (X, Y) for the weak-Gamma kernel")
    p.add_argument("--include-y", action="store_true", help="add Y columns (weak-Gamma)")
    p.add_argument("--classify", action="store_true", help="JSON: add long-term classification")

    p = sub.add_parser("spectrum", help="onset frequency and EEG band")
    _common(p)
    p.add_argument("--method", choices=("analytic", "fft"), default="analytic")
    p.add_argument("--T", dest="T", type=float, help="delay for the fft method (ms)")
    p.add_argument("--horizon", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--init", type=float, nargs="+", default=[0.0, 0.0, 0.0, 0.0])
    return parser


def _network(args, required=True):
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        net = load_config(args.config)
    elif args.preset or required:
        net = preset(args.preset or "wang-baseline")
    else:
        return None
    updates = {}
    for item in args.overrides:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects NAME=VALUE, got {item!r}")
        try:
            updates[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"--set {name}: {value!r} is not a number") from None
    return net.with_weights(**updates) if updates else net


def _kernel(args, net):
    if args.kernel:
        return KernelKind.parse(args.kernel)
    return net.kernel.kind


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _f(v):
    return "" if v is None else f"{v:.9g}"


def _emit(args, text: str):
    if args.out:
        try:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise ConfigError(f"cannot write {args.out}: {exc}") from None
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def cmd_equilibrium(args):
    net = _network(args)
    eqs = find_equilibria(net)
    if args.format == "json":
        return _json({"equilibria": [e.to_dict() for e in eqs]})
    rows = [[i, *(_f(v) for v in e.x_star), _f(e.alpha), _f(e.beta), _f(e.residual)]
            for i, e in enumerate(eqs)]
    return _csv(["index", "E1", "I1", "E2", "I2", "alpha", "beta", "residual"], rows)


def cmd_coeffs(args):
    net = _network(args)
    eqs = find_equilibria(net)
    if not 0 <= args.eq_index < len(eqs):
        raise ConfigError(f"equilibrium index {args.eq_index} out of range ({len(eqs)} found)")
    eq = eqs[args.eq_index]
    rc = classify_region(eq.alpha, eq.beta)
    d = {
        "alpha": eq.alpha,
        "beta": eq.beta,
        "phi": [float(v) for v in eq.phi],
        "no_delay_stable": rc.no_delay_stable,
        "region": rc.delay_independent.value,
        "gamma_zone": rc.gamma_zone.value if rc.gamma_zone else None,
        "kernel_class": {k.value: v.value for k, v in rc.kernel_class.items()},
    }
    if args.format == "json":
        return _json(d)
    return _csv(["alpha", "beta", "region", "zone", "no_delay_stable"],
                [[_f(eq.alpha), _f(eq.beta), d["region"], d["gamma_zone"] or "", int(rc.no_delay_stable)]])


def cmd_critical_delay(args):
    net = _network(args)
    kind = _kernel(args, net)
    rep = physical_critical_delays(net, kind, k_max=args.k_max, eq_index=args.eq_index)
    if args.format == "json":
        return _json(rep.to_dict())
    rows = [[e.label, _f(e.omega), _f(e.tau_tilde), _f(e.tau_tilde * net.tau_bar),
             e.transversality, e.case.value] for e in rep.delays.entries]
    return _csv(["label", "omega", "tau_tilde", "T_ms", "transversality", "case"], rows)


def cmd_sweep(args):
    ax1, ax2 = SweepAxis.parse(args.axis1), SweepAxis.parse(args.axis2)
    raw = ax1.name in RAW_AXES or ax2.name in RAW_AXES
    net = None if raw else _network(args)
    if raw and (args.config or args.preset or args.overrides):
        raise ConfigError("alpha/beta sweeps do not take a network")
    if args.kernels:
        kernels = tuple(KernelKind.parse(k.strip()) for k in args.kernels.split(","))
    elif args.kernel:
        kernels = (KernelKind.parse(args.kernel),)
    else:
        kernels = (net.kernel.kind if net is not None else KernelKind.DIRAC,)
    cfg = SweepConfig(ax1, ax2, net, kernels, tau_bar=args.tau_bar)
    grid = run_sweep(cfg, workers=args.workers)
    return export_grid(grid, args.format)


def _simulate(args, net, kind):
    T = args.T if args.T is not None else net.kernel.tau_ms
    if kind is KernelKind.DIRAC:
        if len(args.init) != 4:
            raise ConfigError("the Dirac kernel takes 4 initial values")
        return simulate_dirac(net, T, args.init, args.horizon, args.dt)
    return simulate_weak_gamma(net, T, args.init, args.horizon, args.dt)


def cmd_simulate(args):
    net = _network(args)
    kind = _kernel(args, net)
    if args.include_y and kind is KernelKind.DIRAC:
        raise ConfigError("--include-y needs the weak-gamma kernel")
    traj = _simulate(args, net, kind)
    if args.format == "csv":
        return traj.to_csv(include_y=args.include_y)
    d = traj.to_dict()
    if not args.include_y:
        d.pop("y", None)
    if args.classify:
        eq = find_equilibria(net)[0]
        d["classification"] = classify_longterm(traj, eq).to_dict()
    return _json(d)


def cmd_spectrum(args):
    net = _network(args)
    kind = _kernel(args, net)
    if args.method == "analytic":
        rep = physical_critical_delays(net, kind, k_max=0)
        onset = rep.delays.onset
        if onset is None:
            raise ConfigError(f"no oscillation onset for the {kind.value} kernel at this equilibrium")
        report = report_analytic(onset.omega, onset.tau_tilde * net.tau_bar)
    else:
        report = report_fft(_simulate(args, net, kind))
    d = report.to_dict()
    if args.format == "json":
        return _json(d)
    return _csv(["f_hz", "band", "method"], [[_f(d["f_hz"]), d["band"], d["method"]]])


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "coeffs": cmd_coeffs,
    "critical-delay": cmd_critical_delay,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "spectrum": cmd_spectrum,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _emit(args, COMMANDS[args.command](args))
    except (ConfigError, ZoneMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
