"""``fbmruin`` command line.

Exit codes: 0 success, 1 malformed arguments or input files, 2 domain errors
(invalid parameters, missing constants), 3 convergence or budget failures.
Errors are reported as one JSON record on standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__, io
from .asymptotics import EXPONENT_CONVENTIONS, PROOF_CONSISTENT, two_dim_asymptote
from .constants import (
    DIRECT,
    MIXTURE,
    ConstantConfig,
    PickandsConfig,
    PiterbargDriftSpec,
    estimate_discrete_pickands,
    estimate_pickands,
    estimate_piterbarg_pair,
)
from .errors import BUDGET_ERRORS, DOMAIN_ERRORS
from .harness import CSV_HEADER, bounds_inclusion, oscillation_experiment, ratio_table, trend_slope
from .mc import CRUDE, EXPAND, FIXED, LOCALIZED, TILT, HorizonPolicy, MCConfig, simulate_two_dim
from .model import Case, ModelParams, classify, derive, validate


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise io.SchemaError(message)


def _add_params(p, delta_default=1.0):
    g = p.add_argument_group("model")
    g.add_argument("--c1", type=float, required=True)
    g.add_argument("--q1", type=float, required=True)
    g.add_argument("--c2", type=float, help="defaults to c1 (single line)")
    g.add_argument("--q2", type=float, help="defaults to q1 (single line)")
    g.add_argument("--H", type=float, required=True)
    g.add_argument("--delta", type=float, default=delta_default)


def _add_mc(p):
    g = p.add_argument_group("simulation")
    g.add_argument("--n-paths", type=int, default=100_000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--method", choices=(CRUDE, TILT), default=TILT)
    g.add_argument("--horizon", choices=(LOCALIZED, EXPAND, FIXED), default=LOCALIZED)
    g.add_argument("--window", type=float, default=3.0)
    g.add_argument("--T", type=float, help="horizon for --horizon fixed")


def _add_output(p, formats=("json",)):
    p.add_argument("--output", "-o", type=Path, help="write the result here (atomically)")
    p.add_argument("--format", choices=formats, default=formats[0])


def _params(args) -> ModelParams:
    c2 = args.c1 if args.c2 is None else args.c2
    q2 = args.q1 if args.q2 is None else args.q2
    return validate(ModelParams(args.c1, args.q1, c2, q2, args.H, args.delta))


def _mc_cfg(args) -> MCConfig:
    horizon = HorizonPolicy(mode=args.horizon, window=args.window, T=args.T)
    return MCConfig(n_paths=args.n_paths, seed=args.seed, method=args.method, horizon=horizon)


def _u_values(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise io.SchemaError(f"cannot parse u list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fbmruin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("classify", help="asymptotic regime and critical times")
    _add_params(p)
    _add_output(p)

    p = sub.add_parser("asymptote", help="evaluate the asymptote or bounds")
    _add_params(p)
    p.add_argument("--u", required=True, help="level or comma-separated levels")
    p.add_argument("--constants", type=Path, help="constants fixture file")
    p.add_argument("--convention", choices=EXPONENT_CONVENTIONS, default=PROOF_CONSISTENT)
    _add_output(p)

    p = sub.add_parser("constants", help="estimate constants and store them as fixtures")
    _add_params(p)
    p.add_argument("--n-paths", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--T", type=float, default=16.0, help="initial truncation for grid constants")
    p.add_argument("--S", type=float, default=32.0, help="window for the Pickands constant")
    p.add_argument("--mesh-points", type=int, default=1 << 14)
    p.add_argument("--piterbarg-method", choices=(MIXTURE, DIRECT), default=MIXTURE)
    p.add_argument("--output", "-o", type=Path, required=True, help="constants file (merged if present)")

    p = sub.add_parser("simulate", help="Monte Carlo ruin probability")
    _add_params(p)
    p.add_argument("--u", type=float, required=True)
    _add_mc(p)
    _add_output(p)

    p = sub.add_parser("verify", help="ratio table or bracket verdicts over a u grid")
    _add_params(p)
    p.add_argument("--u", required=True, help="comma-separated levels")
    p.add_argument("--constants", type=Path)
    p.add_argument("--convention", choices=EXPONENT_CONVENTIONS, default=PROOF_CONSISTENT)
    p.add_argument("--allow-below-floor", action="store_true")
    _add_mc(p)
    _add_output(p, ("csv", "json"))

    p = sub.add_parser("report", help="on-grid versus off-grid oscillation experiment (H < 1/2)")
    _add_params(p)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--u-target", type=float, default=10.0)
    p.add_argument("--convention", choices=EXPONENT_CONVENTIONS, default=PROOF_CONSISTENT)
    _add_mc(p)
    _add_output(p)
    return parser


def _emit(args, payload, summary: str, text: str | None = None):
    text = text if text is not None else io.dumps(payload) + "\n"
    if args.output:
        io.atomic_write(args.output, text)
    else:
        sys.stdout.write(text)
    print(summary)


def _bundle(path):
    return io.load_bundle(path) if path else None


def cmd_classify(args):
    params = _params(args)
    cls = classify(params)
    payload = {"schemaVersion": io.SCHEMA_VERSION, "params": params, "tag": cls.tag, "swapped": cls.swapped}
    summary = cls.tag
    if cls.case is not Case.DEGENERATE_ONE_LINE:
        q = derive(params)
        payload["derived"] = q
        summary += f" t1={q.t1:.6g} t2={q.t2:.6g} t*={q.t_star:.6g}"
    _emit(args, payload, summary)


def _asymptote_payload(res, u):
    out = {"u": u, "kind": res.kind, "branch": res.branch, "exponentConvention": res.exponent_convention,
           "flags": list(res.flags)}
    if res.kind == "point":
        out["value"], out["logValue"] = res.value, res.log_value
    else:
        out.update(lower=res.lower, upper=res.upper, logLower=res.log_lower, logUpper=res.log_upper)
    return out


def cmd_asymptote(args):
    params = _params(args)
    k, used = io.require_constants(params, _bundle(args.constants))
    results = [_asymptote_payload(two_dim_asymptote(params, u, k, args.convention), u) for u in _u_values(args.u)]
    payload = {
        "schemaVersion": io.SCHEMA_VERSION,
        "params": params,
        "tag": classify(params).tag,
        "results": results,
        "constants": [{"name": r["name"], "specHash": r["specHash"], "value": r["value"], "stdErr": r["stdErr"]}
                      for r in used],
    }
    _emit(args, payload, f"{len(results)} asymptote value(s) for {payload['tag']}")


def _needed_estimates(params: ModelParams, args):
    """Estimate every constant the asymptote of ``params`` uses."""
    cls = classify(params)
    H = params.H
    cfg = ConstantConfig(T=args.T, n_paths=args.n_paths, seed=args.seed)
    half = abs(H - 0.5) < 1e-12
    if cls.case is Case.CASE_TWO_INTERIOR:
        if not half:
            return []
        q = derive(params)
        upper = PiterbargDriftSpec.from_quantities(q)
        lower = PiterbargDriftSpec.from_quantities(q, shifted=True)
        return list(estimate_piterbarg_pair(upper, lower, q.gamma, cfg, args.piterbarg_method))
    c, _ = params.line(cls.index)
    if half:
        return [estimate_discrete_pickands(2.0 * c * c * params.delta, cfg)]
    if H > 0.5:
        pcfg = PickandsConfig(S=args.S, n_paths=args.n_paths, mesh_points=args.mesh_points, seed=args.seed)
        return [estimate_pickands(2.0 * H, pcfg)]
    return []


def cmd_constants(args):
    params = _params(args)
    t0 = time.perf_counter()
    estimates = _needed_estimates(params, args)
    records = [io.fixture_record(e) for e in estimates]
    existing = io.load_bundle(args.output) if args.output.exists() else None
    bundle = io.merge_records(existing, records)
    io.atomic_write(args.output, io.dumps(bundle) + "\n")
    names = ", ".join(f"{r['name']}={r['value']:.6g}±{r['stdErr']:.2g}" for r in records) or "none needed"
    print(f"{len(records)} constant(s) in {time.perf_counter() - t0:.1f}s: {names}")


def cmd_simulate(args):
    params = _params(args)
    est = simulate_two_dim(params, args.u, _mc_cfg(args))
    payload = {"schemaVersion": io.SCHEMA_VERSION, "params": params, "estimate": est}
    _emit(args, payload, f"p_hat={est.p_hat:.6g} ± {est.ci_half_width:.2g} ({est.method}, {est.runtime_s:.1f}s)")


def cmd_verify(args):
    params = _params(args)
    k, used = io.require_constants(params, _bundle(args.constants))
    rows = ratio_table(params, _u_values(args.u), k, _mc_cfg(args), args.convention,
                       enforce_floor=not args.allow_below_floor)
    if args.format == "csv":
        text = io.csv_text(CSV_HEADER, [r.csv_fields() for r in rows])
    else:
        payload = {"schemaVersion": io.SCHEMA_VERSION, "params": params, "rows": rows,
                   "constants": [r["specHash"] for r in used]}
        ratios = [r for r in rows if r.ratio is not None]
        if len(ratios) >= 2:
            payload["trend"] = trend_slope(ratios)
        text = io.dumps(payload) + "\n"
    verdicts = ", ".join(str(r.ratio_or_verdict if r.verdict else f"{r.ratio:.4g}") for r in rows)
    _emit(args, None, f"{len(rows)} row(s): {verdicts}", text)


def cmd_report(args):
    params = _params(args)
    rep = oscillation_experiment(params, args.levels, _mc_cfg(args), args.u_target, args.convention)
    payload = {"schemaVersion": io.SCHEMA_VERSION, "params": params, "report": rep,
               "longestSignificantRun": rep.longest_significant_run}
    _emit(args, payload, f"{len(rep.u_on_grid)} pair(s), longest significant run {rep.longest_significant_run}, "
                         f"separation {rep.separation:.3g}")


COMMANDS = {
    "classify": cmd_classify,
    "asymptote": cmd_asymptote,
    "constants": cmd_constants,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "report": cmd_report,
}


def _fail(code: int, exc: BaseException) -> int:
    record = {"error": type(exc).__name__, "exitCode": code, "message": str(exc)}
    if getattr(exc, "field", None):
        record["field"] = exc.field
    sys.stderr.write(json.dumps(record) + "\n")
    return code


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except io.SchemaError as exc:
        return _fail(1, exc)
    except DOMAIN_ERRORS as exc:
        return _fail(2, exc)
    except BUDGET_ERRORS as exc:
        return _fail(3, exc)
    except FileNotFoundError as exc:
        return _fail(1, exc)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
