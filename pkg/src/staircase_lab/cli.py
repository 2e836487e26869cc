"""staircase-lab command line.

Every command writes a deterministic report (JSON or CSV) that embeds the
resolved experiment configuration. Exit codes: 0 success, 2 usage or input
errors, 3 internal failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from . import analysis, circle, ensembles, lab
from .circle import CircleMapError
from .engine import activity, trajectory
from .io import ParseError, activity_to_dict, default_context_for, load_model, parse_config, parse_graphon, trace_csv
from .model import ModelError
from .rationals import format_fraction, to_fraction

THREADS_ENV = "STAIRCASE_LAB_THREADS"


class UsageError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Everything that determines a command's output. Thread count and output path are excluded."""

    command: str
    inputs: dict = field(default_factory=dict)
    seed: int | None = None
    grids: dict = field(default_factory=dict)
    budgets: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    format: str = "json"

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v not in (None, {}, [])}

    def header(self) -> str:
        return "# config: " + json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"


# formatting -------------------------------------------------------------------


def _num(x) -> str:
    """Rationals as num/den, floats by their shortest round-trip repr."""
    if x is None:
        return ""
    if isinstance(x, (Fraction, int)) and not isinstance(x, bool):
        return format_fraction(Fraction(x))
    return repr(float(x))


def _jnum(x):
    return None if x is None else _num(x)


def _json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _csv(header, rows, config: ExperimentConfig) -> str:
    buf = io.StringIO()
    buf.write(config.header())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


# argument resolution ----------------------------------------------------------


def _rational(text: str, name: str) -> Fraction:
    try:
        return to_fraction(text)
    except (ValueError, TypeError, ZeroDivisionError):
        raise UsageError(f"{name}: {text!r} is not a rational") from None


def _read(path: str) -> tuple:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return data.decode("utf-8"), {"name": Path(path).name, "sha256": hashlib.sha256(data).hexdigest()}


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if not env:
        return 1
    try:
        v = int(env)
    except ValueError:
        raise UsageError(f"{THREADS_ENV}={env!r} is not an integer") from None
    if v < 1:
        raise UsageError(f"{THREADS_ENV} must be positive")
    return v


def parse_rational_grid(text: str, name: str) -> list:
    """``a:b:count`` (inclusive, equally spaced) or a comma list; must be strictly increasing."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"{name}: expected lo:hi:count")
        lo, hi = _rational(parts[0], name), _rational(parts[1], name)
        try:
            count = int(parts[2])
        except ValueError:
            raise UsageError(f"{name}: count {parts[2]!r} is not an integer") from None
        if count < 1 or (count == 1 and lo != hi):
            raise UsageError(f"{name}: count must be at least 2 for a proper range")
        grid = [lo] if count == 1 else [lo + (hi - lo) * i / (count - 1) for i in range(count)]
    else:
        grid = [_rational(t, name) for t in text.split(",") if t.strip()]
    if not grid:
        raise UsageError(f"{name}: empty grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise UsageError(f"{name}: grid must be strictly increasing")
    return grid


def _mu_token(text: str, p: Fraction):
    """A rational, or ``p/log2`` / ``t*p/log2``; returns (rational or None, log2 multiple or None)."""
    t = text.strip().replace(" ", "")
    if t == "p/log2":
        return None, Fraction(1)
    if t.endswith("*p/log2"):
        return None, _rational(t[: -len("*p/log2")], "--mu")
    return _rational(t, "--mu"), None


def parse_mu_grid(text: str, p: Fraction) -> list:
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError("--mu-grid: expected lo:hi:count")
        (qa, ta), (qb, tb) = _mu_token(parts[0], p), _mu_token(parts[1], p)
        try:
            count = int(parts[2])
        except ValueError:
            raise UsageError(f"--mu-grid: count {parts[2]!r} is not an integer") from None
        if count < 2:
            raise UsageError("--mu-grid: count must be at least 2")
        if ta is None and tb is None:
            mus = [lab.mu_rational(qa + (qb - qa) * i / (count - 1)) for i in range(count)]
        else:
            # a log2 range needs both ends as multiples of p/log2; plain 0 qualifies
            if (ta is None and qa != 0) or (tb is None and qb != 0):
                raise UsageError("--mu-grid: cannot mix rational and p/log2 endpoints")
            ta = Fraction(0) if ta is None else ta
            tb = Fraction(0) if tb is None else tb
            mus = [lab.mu_log2(ta + (tb - ta) * i / (count - 1), p) for i in range(count)]
    else:
        mus = []
        for tok in text.split(","):
            if not tok.strip():
                continue
            q, t = _mu_token(tok, p)
            mus.append(lab.mu_rational(q) if t is None else lab.mu_log2(t, p))
    if not mus:
        raise UsageError("--mu-grid: empty grid")
    for m in mus:
        if m.value < 0 or (m.log2_multiple is not None and m.log2_multiple > 1) or (
            m.log2_multiple is None and m.value > float(p) / math.log(2)
        ):
            raise UsageError(f"--mu-grid: {m.label} lies outside [0, p/log2]")
    if any(b.value <= a.value for a, b in zip(mus, mus[1:])):
        raise UsageError("--mu-grid: grid must be strictly increasing")
    return mus


def _probability(text: str, name: str = "--p") -> Fraction:
    p = _rational(text, name)
    if not 0 < p <= 1:
        raise UsageError(f"{name} must lie in (0, 1]")
    return p


# estimate rows ----------------------------------------------------------------


def _estimate_cells(est) -> list:
    if est.is_exact:
        value = est.value if est.value is not None else est.lower
        return [est.kind, _num(value), _num(value), est.period]
    return [est.kind, _num(est.lower), _num(est.upper), ""]


# commands ---------------------------------------------------------------------


def cmd_activity(args) -> str:
    mtext, mmeta = _read(args.model)
    ctext, cmeta = _read(args.config)
    model = load_model(mtext, Path(args.model).name)
    sigma = parse_config(ctext, Path(args.config).name, default_context_for(model))
    cfg = ExperimentConfig("activity", {"model": mmeta, "config": cmeta}, budgets={"max_steps": args.max_steps})
    est = activity(model, sigma, max_steps=args.max_steps)
    if args.trace:
        states = list(trajectory(model, sigma, args.trace_steps))
        Path(args.trace).write_text(cfg.header() + trace_csv(states), encoding="utf-8", newline="\n")
    out = activity_to_dict(est)
    out["config"] = cfg.to_dict()
    return _json(out)


def cmd_diagram(args) -> str:
    mtext, mmeta = _read(args.model)
    ctext, cmeta = _read(args.config)
    model = load_model(mtext, Path(args.model).name)
    sigma = parse_config(ctext, Path(args.config).name, default_context_for(model))
    ys = parse_rational_grid(args.y_grid, "--y-grid")
    if ys[0] < 0:
        raise UsageError("--y-grid: values must be nonnegative")
    cfg = ExperimentConfig(
        "diagram", {"model": mmeta, "config": cmeta}, grids={"y": [format_fraction(y) for y in ys]},
        budgets={"budget": args.budget, "budget_cap": args.budget_cap or args.budget, "audit_cap": args.audit_cap},
        format=args.format,
    )
    samples = lab.activity_diagram(model, sigma, ys, args.budget, args.budget_cap, args.audit_cap, _threads(args))
    plateaus = lab.plateau_detect(samples)
    if args.plateaus:
        Path(args.plateaus).write_text(_json({"config": cfg.to_dict(), "plateaus": _plateau_list(plateaus)}),
                                       encoding="utf-8", newline="\n")
    if args.figure:
        from .plotting import plot_diagram
        plot_diagram(samples, args.figure)
    if args.format == "json":
        return _json({
            "config": cfg.to_dict(),
            "samples": [dict(parameter=s.label, smoothness_hits=s.smoothness_hits, **activity_to_dict(s.estimate))
                        for s in samples],
            "plateaus": _plateau_list(plateaus),
        })
    rows = [[s.label, *_estimate_cells(s.estimate), s.smoothness_hits] for s in samples]
    return _csv(["parameter", "kind", "value_or_lower", "upper", "period", "smoothness_hits"], rows, cfg)


def _plateau_list(plateaus) -> list:
    return [
        {"start": _num(pl.start), "end": _num(pl.end), "value": _num(pl.value),
         "matched": _jnum(pl.matched), "count": pl.count}
        for pl in plateaus
    ]


def cmd_geometric(args) -> str:
    p = _probability(args.p)
    mus = parse_mu_grid(args.mu_grid, p)
    ens = ensembles.SeededEnsemble(args.seed, args.n, p)
    cfg = ExperimentConfig(
        "geometric", seed=args.seed, grids={"mu": [m.label for m in mus]},
        budgets={"budget": args.budget, "budget_cap": args.budget_cap or args.budget,
                 "reference_iterations": args.reference_iterations, "audit_cap": args.audit_cap},
        params={"ensemble": ens.manifest()}, format=args.format,
    )
    sweep = lab.geometric_sweep(
        args.n, p, mus, args.seed, args.budget, args.budget_cap, args.reference_iterations,
        args.audit_cap, _threads(args),
    )
    if args.figure:
        from .plotting import plot_geometric
        plot_geometric(sweep, args.figure)
    if args.format == "json":
        return _json({
            "config": cfg.to_dict(),
            "connected": sweep.connected,
            "sup_gap": _jnum(sweep.sup_gap),
            "samples": [
                dict(parameter=s.mu.label, mu=_num(s.mu.value), smoothness_hits=s.smoothness_hits,
                     reference_lower=_num(s.reference.lower), reference_upper=_num(s.reference.upper),
                     gap=_num(s.gap), **activity_to_dict(s.estimate))
                for s in sweep.samples
            ],
        })
    rows = [
        [s.mu.label, *_estimate_cells(s.estimate), s.smoothness_hits, _num(s.mu.value),
         _num(s.reference.lower), _num(s.reference.upper), _num(s.gap)]
        for s in sweep.samples
    ]
    header = ["parameter", "kind", "value_or_lower", "upper", "period", "smoothness_hits",
              "mu", "reference_lower", "reference_upper", "gap"]
    return _csv(header, rows, cfg)


def cmd_rotation(args) -> str:
    if (args.mu is None) == (args.config is None):
        raise UsageError("give exactly one of --mu or --config")
    x0 = _rational(args.x0, "--x0")
    cfg = ExperimentConfig("rotation", budgets={"iterations": args.iterations}, params={"x0": format_fraction(x0)})
    if args.mu is not None:
        p = _probability(args.p)
        q, t = _mu_token(args.mu, p)
        mu = lab.mu_rational(q) if t is None else lab.mu_log2(t, p)
        if mu.value <= 0:
            raise UsageError("--mu must be positive")
        fmap = circle.CircleMap.geometric_at_log2(float(p)) if mu.at_log2 else circle.f_mu(mu.value, float(p))
        cfg.params.update(mu=mu.label, p=format_fraction(p))
        x = float(x0)
    else:
        ctext, cmeta = _read(args.config)
        cfg.inputs["config"] = cmeta
        carrier = None
        if args.carrier:
            wtext, wmeta = _read(args.carrier)
            carrier = parse_graphon(wtext, Path(args.carrier).name)
            cfg.inputs["carrier"] = wmeta
        sigma = parse_config(ctext, Path(args.config).name, "graphon")
        if args.y is None:
            fmap = circle.build_f_sigma(sigma, carrier)
        else:
            y = _rational(args.y, "--y")
            fmap = circle.build_phi(sigma, y, carrier)
            cfg.params["y"] = format_fraction(y)
        x = x0
    res = circle.rotation_number(fmap, args.iterations, x)
    if args.sample_out:
        if args.sample_points < 1:
            raise UsageError("--sample-points must be positive")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "f(x)"])
        for i in range(args.sample_points):
            xi = Fraction(i, args.sample_points)
            w.writerow([_num(xi), _num(fmap(xi if fmap.kind != "closed_form" else float(xi)))])
        Path(args.sample_out).write_text(cfg.header() + buf.getvalue(), encoding="utf-8", newline="\n")
    return _json({"lower": _num(res.lower), "upper": _num(res.upper), "n": res.n, "x0": _num(res.x0),
                  "config": cfg.to_dict()})


def cmd_cutdist(args) -> str:
    utext, umeta = _read(args.u)
    wtext, wmeta = _read(args.w)
    u = parse_graphon(utext, Path(args.u).name)
    w = parse_graphon(wtext, Path(args.w).name)
    cfg = ExperimentConfig("cutdist", {"u": umeta, "w": wmeta}, seed=args.seed,
                           params={"method": args.method, "restarts": args.restarts})
    res = analysis.cut_distance(u, w, args.method, args.restarts, args.seed)

    def iv(ws):
        return [[_num(a), _num(b)] for a, b in ws]

    return _json({"lower": _num(res.lower), "upper": _num(res.upper), "exact": res.exact,
                  "witness_S": iv(res.witness_S), "witness_T": iv(res.witness_T),
                  "degree_l1": _num(analysis.degree_l1(u, w)), "config": cfg.to_dict()})


def cmd_mixing(args) -> str:
    wtext, wmeta = _read(args.graphon)
    w = parse_graphon(wtext, Path(args.graphon).name)
    cfg = ExperimentConfig("mixing", {"graphon": wmeta}, params={"steps": args.steps}, format=args.format)
    rep = analysis.markov_mixing(w, args.steps)
    if args.figure:
        from .plotting import plot_mixing
        plot_mixing(rep, args.figure)
    header = ["n", "max_tv"] + (["tv_X", "tv_Y"] if rep.bipartite else [])
    rows = [[r[0], *(_num(v) for v in r[1:])] for r in rep.rows]
    if args.format == "json":
        return _json({"config": cfg.to_dict(), "stationary": [_num(v) for v in rep.stationary],
                      "bipartite": rep.bipartite, "exact_steps": rep.exact_steps,
                      "error_bound": _num(rep.error_bound), "rows": [dict(zip(header, r)) for r in rows]})
    return _csv(header, rows, cfg)


def cmd_counterexample(args) -> str:
    validate = min(args.window, args.validate_up_to)
    cfg = ExperimentConfig("counterexample", budgets={"validate_up_to": validate},
                           params={"window": args.window, "start": args.start, "min_from": args.min_from},
                           format=args.format)
    spec = lab.CounterexampleSpec(args.window, start=args.start)
    res = lab.counterexample_sequence(spec, args.min_from, validate)
    if not res.agree:
        raise RuntimeError("set-count and simulated odometers disagree")
    if args.figure:
        from .plotting import plot_counterexample
        plot_counterexample(res, args.figure)
    u = res.odometer
    rows = [[n, int(u[n]), _num(Fraction(int(u[n]), n))] for n in range(1, len(u))]
    if args.format == "json":
        return _json({"config": cfg.to_dict(), "max_ratio": _num(res.max_ratio), "argmax": res.argmax,
                      "min_ratio": _num(res.min_ratio), "argmin": res.argmin,
                      "validated_up_to": res.validated_up_to, "agree": res.agree})
    return _csv(["n", "u_n", "ratio"], rows, cfg)


def cmd_concentration(args) -> str:
    p = _probability(args.p)
    eta = _rational(args.eta, "--eta")
    if eta <= 0:
        raise UsageError("--eta must be positive")
    cfg = ExperimentConfig("concentration", seed=args.seed,
                           params={"n": args.n, "p": format_fraction(p), "eta": format_fraction(eta),
                                   "trials": args.trials})
    rep = ensembles.degree_concentration(args.n, p, eta, args.trials, args.seed)
    return _json({"violations": rep.violations, "frequency": _num(rep.frequency),
                  "standard_error": _num(rep.standard_error), "bound": _num(rep.bound),
                  "passes": rep.passes, "config": cfg.to_dict()})


# parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="staircase-lab", description="Parallel chip-firing experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, fmt=None, figure=False, threads=False):
        sp.add_argument("--out", help="output file (default: standard output)")
        if fmt:
            sp.add_argument("--format", choices=["csv", "json"], default=fmt)
        if figure:
            sp.add_argument("--figure", metavar="PNG", help="also render a figure to this file")
        if threads:
            sp.add_argument("--threads", type=_positive_int, default=None,
                            help=f"worker processes (default: ${THREADS_ENV} or 1)")

    sp = sub.add_parser("activity", help="activity of one configuration")
    sp.add_argument("model", help="graph edge list or step graphon JSON")
    sp.add_argument("config", help="chip configuration JSON")
    sp.add_argument("--max-steps", type=_positive_int, default=100_000)
    sp.add_argument("--trace", metavar="CSV", help="write the trajectory here")
    sp.add_argument("--trace-steps", type=_nonneg_int, default=100)
    common(sp)
    sp.set_defaults(func=cmd_activity)

    sp = sub.add_parser("diagram", help="activity diagram s(y) over a y grid")
    sp.add_argument("model")
    sp.add_argument("config")
    sp.add_argument("--y-grid", default="0:1:1024", help="lo:hi:count or comma list of rationals")
    sp.add_argument("--budget", type=_positive_int, default=lab.DEFAULT_BUDGET)
    sp.add_argument("--budget-cap", type=_positive_int, default=None)
    sp.add_argument("--audit-cap", type=_nonneg_int, default=10_000)
    sp.add_argument("--plateaus", metavar="JSON", help="write the plateau report here")
    common(sp, fmt="csv", figure=True, threads=True)
    sp.set_defaults(func=cmd_diagram)

    sp = sub.add_parser("geometric", help="G(n, p) with coupled geometric chips against rho(f^mu)")
    sp.add_argument("--n", type=_positive_int, required=True)
    sp.add_argument("--p", default="1/2")
    sp.add_argument("--mu-grid", default="0:p/log2:64", help="lo:hi:count or comma list; p/log2 and t*p/log2 allowed")
    sp.add_argument("--seed", type=_nonneg_int, default=0)
    sp.add_argument("--budget", type=_positive_int, default=lab.DEFAULT_BUDGET)
    sp.add_argument("--budget-cap", type=_positive_int, default=None)
    sp.add_argument("--reference-iterations", type=_positive_int, default=lab.REFERENCE_ITERATIONS)
    sp.add_argument("--audit-cap", type=_nonneg_int, default=1000)
    common(sp, fmt="csv", figure=True, threads=True)
    sp.set_defaults(func=cmd_geometric)

    sp = sub.add_parser("rotation", help="rotation-number enclosure")
    sp.add_argument("--mu", help="rational, p/log2 or t*p/log2 for the geometric map")
    sp.add_argument("--p", default="1/2")
    sp.add_argument("--config", help="configuration on C_1 for f_sigma, or Phi with --y")
    sp.add_argument("--y")
    sp.add_argument("--carrier", help="C_1 step graphon supplying part measures")
    sp.add_argument("--iterations", type=_positive_int, default=100_000)
    sp.add_argument("--x0", default="0")
    sp.add_argument("--sample-out", metavar="CSV", help="write (x, f(x)) samples here")
    sp.add_argument("--sample-points", type=int, default=1024)
    common(sp)
    sp.set_defaults(func=cmd_rotation)

    sp = sub.add_parser("cutdist", help="labeled cut distance of two step graphons")
    sp.add_argument("u")
    sp.add_argument("w")
    sp.add_argument("--method", choices=["auto", "exact", "heuristic"], default="auto")
    sp.add_argument("--restarts", type=_positive_int, default=32)
    sp.add_argument("--seed", type=_nonneg_int, default=0)
    common(sp)
    sp.set_defaults(func=cmd_cutdist)

    sp = sub.add_parser("mixing", help="total-variation mixing of the part-level chain")
    sp.add_argument("graphon")
    sp.add_argument("--steps", type=_positive_int, default=64)
    common(sp, fmt="csv", figure=True)
    sp.set_defaults(func=cmd_mixing)

    sp = sub.add_parser("counterexample", help="odometer of the oscillating construction")
    sp.add_argument("--window", type=_nonneg_int, default=720)
    sp.add_argument("--start", type=int, default=2)
    sp.add_argument("--min-from", type=_positive_int, default=24)
    sp.add_argument("--validate-up-to", type=_nonneg_int, default=10_000)
    common(sp, fmt="csv", figure=True)
    sp.set_defaults(func=cmd_counterexample)

    sp = sub.add_parser("concentration", help="degree concentration over independent G(n, p)")
    sp.add_argument("--n", type=_positive_int, default=200)
    sp.add_argument("--p", default="1/2")
    sp.add_argument("--eta", default="1/10")
    sp.add_argument("--trials", type=_positive_int, default=10_000)
    sp.add_argument("--seed", type=_nonneg_int, default=0)
    common(sp)
    sp.set_defaults(func=cmd_concentration)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _emit(args.func(args), args.out)
    except (UsageError, ParseError, ModelError, CircleMapError) as exc:
        print(f"staircase-lab: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"staircase-lab: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
