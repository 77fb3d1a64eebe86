"""Command-line front end.

Subcommands: rate, threshold, sweep, entropy, simulate, finite-key.  Data go
to stdout (or ``--output``), diagnostics to stderr.  Exit status is 0 on
success, 1 when a computation aborts and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings

from . import entropy as ent
from . import finitekey as fk
from . import keyrate as kr
from .distributions import JointDistribution
from .postproc import PipelineConfig, report_json, run_pipeline

SWEEP_HELP = "CSV columns: " + ",".join(kr.SWEEP_COLUMNS)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _num(x) -> str:
    if isinstance(x, float):
        return kr.format_number(x)
    return str(x)


def _emit(text: str, args) -> None:
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _kv(pairs) -> str:
    return "".join(f"{k}: {_num(v)}\n" for k, v in pairs)


def cmd_rate(args) -> int:
    q = args.q
    if args.optimize_q:
        q, _ = kr.optimize_preprocessing(args.protocol, args.e, args.b)
    res = kr.rate(kr.ProtocolParams(args.protocol, args.e, args.b, q))
    if args.format == "json":
        _emit(_json(res.to_dict()), args)
    else:
        row = res.as_row()
        _emit(_kv((c, row[c]) for c in kr.SWEEP_COLUMNS), args)
    return 0


def cmd_threshold(args) -> int:
    if args.b_scan:
        scan = kr.threshold_b_scan(args.protocol, args.b_scan, args.optimize_q)
        if args.format == "json":
            _emit(_json([{"b": b, "threshold": t} for b, t in scan]), args)
        else:
            lines = ["b,threshold\n"] + [f"{b},{'' if t is None else f'{t:.4f}'}\n" for b, t in scan]
            _emit("".join(lines), args)
        return 0
    t = kr.find_threshold(args.protocol, args.b, args.optimize_q)
    if args.format == "json":
        _emit(_json({"protocol": args.protocol, "b": args.b, "optimize_q": args.optimize_q,
                     "threshold": t}), args)
    else:
        _emit(f"{t:.4f}\n", args)
    return 0


def cmd_sweep(args) -> int:
    if args.e_step <= 0 or args.e_max < args.e_min:
        raise _UsageError("need e-step > 0 and e-max >= e-min")
    count = int(math.floor((args.e_max - args.e_min) / args.e_step + 1e-9)) + 1
    es = [round(args.e_min + i * args.e_step, 12) for i in range(count)]
    qs = None if args.optimize_q else (args.q or [0.0])
    rows = kr.sweep(args.protocol, es, args.b or [1], qs)
    if args.format == "json":
        _emit(_json([r.as_row() for r in rows]), args)
    else:
        _emit(kr.sweep_csv(rows), args)
    return 0


def cmd_entropy(args) -> int:
    p = JointDistribution.read_table(args.input)
    cond = [] if p.arity < 2 else [p.arity - 1]
    measures = {
        "shannon": lambda: (ent.shannon_conditional(p, cond) if cond else ent.shannon_entropy(p.weights)),
        "min": lambda: ent.classical_min_entropy(p, cond=cond),
        "max": lambda: ent.classical_max_entropy(p, cond=cond),
        "collision": lambda: ent.classical_collision_entropy(p, cond=cond),
        "smooth-min": lambda: ent.smooth_min_entropy_classical(p, eps=args.eps, cond=cond),
        "smooth-max": lambda: ent.smooth_max_entropy_classical(p, eps=args.eps, cond=cond),
    }
    value = measures[args.measure]()
    if args.format == "json":
        _emit(_json({"measure": args.measure, "eps": args.eps, "conditioned_on_last": bool(cond),
                     "value": value}), args)
    else:
        _emit(_num(float(value)) + "\n", args)
    return 0


def cmd_simulate(args) -> int:
    cfg = PipelineConfig(n_raw=args.n, e=args.e, b=args.b, ir=args.ir, ell=args.ell,
                         seed=args.seed, eps=args.eps, pe_samples=args.m,
                         rep_length=args.rep_length)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = run_pipeline(cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    keys = report.get("_keys")
    if keys is not None:
        if args.key_out_a:
            with open(args.key_out_a, "wb") as fh:
                fh.write(keys[0].to_bytes())
        if args.key_out_b:
            with open(args.key_out_b, "wb") as fh:
                fh.write(keys[1].to_bytes())
    _emit(report_json(report) + "\n", args)
    return 0 if report["status"] == "ok" else 1


def cmd_finite_key(args) -> int:
    p = fk.FiniteKeyParams.scheduled(args.N, b=args.b, eps=args.eps, m=args.m, k=args.k,
                                     dim_a=args.dim_a, dim_b=args.dim_b,
                                     alphabet_size=args.alphabet, outcome_count=args.outcomes)
    h_xe = h_xy = None
    if args.protocol is not None:
        worst = kr.rate(kr.ProtocolParams(args.protocol, args.e, args.b, args.q))
        lam = worst.lambdas_used.as_array()
        p_succ, lt = kr.ad_transform(lam, args.b)
        # Per input block: only accepted blocks yield a key bit.
        h_xe = p_succ * kr.entropy_x_given_e(lt, args.q)
        h_xy = p_succ * kr.entropy_x_given_y(lt, args.q)
    report = fk.bound_report(p, h_xe, h_xy)
    if args.format == "json":
        _emit(_json(report), args)
    else:
        d = report["deltas"]
        pairs = [("N", p.N), ("n", p.n), ("m", p.m), ("k", p.k), ("b", p.b), ("eps", p.eps),
                 ("r", d["r"]), ("delta_prime", d["delta_prime"]), ("mu", d["mu"]),
                 ("delta", d["delta"]), ("valid", d["valid"]), ("aep_delta", report["aep_delta"])]
        if "key_length" in report:
            pairs += [("leak_ir", report["leak_ir"]), ("key_length", report["key_length"]),
                      ("key_rate", report["key_rate"])]
        text = _kv(pairs) + "".join(f"invalid: {r}\n" for r in d["reasons"])
        _emit(text, args)
    return 0


class _UsageError(Exception):
    pass


def _protocol(p):
    p.add_argument("--protocol", required=True, choices=kr.PROTOCOLS)


def _common(p):
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--output", help="write data to this file instead of stdout")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")


def _probability(s: str) -> float:
    v = float(s)
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError(f"{s} is not in [0, 1]")
    return v


def _positive(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{s} is not a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qkdsec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rate", help="key rate at one error rate")
    _protocol(p)
    p.add_argument("--e", type=_probability, required=True)
    p.add_argument("--b", type=_positive, default=1)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--q", type=_probability, default=0.0)
    g.add_argument("--optimize-q", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("threshold", help="largest error rate with positive key rate")
    _protocol(p)
    p.add_argument("--optimize-q", action="store_true")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--b", type=_positive, default=1)
    g.add_argument("--b-scan", type=_positive, metavar="MAX", help="thresholds for b = 1..MAX")
    _common(p)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("sweep", help="rates on a grid (CSV)", description=SWEEP_HELP)
    _protocol(p)
    p.add_argument("--e-min", type=_probability, required=True)
    p.add_argument("--e-max", type=_probability, required=True)
    p.add_argument("--e-step", type=float, required=True)
    p.add_argument("--b", type=_positive, nargs="+")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--q", type=_probability, nargs="+")
    g.add_argument("--optimize-q", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("entropy", help="entropy of a distribution table, conditioned on its last column")
    p.add_argument("--input", required=True, help="lines 'label_1 ... label_k weight'")
    p.add_argument("--measure", required=True,
                   choices=("shannon", "min", "max", "collision", "smooth-min", "smooth-max"))
    p.add_argument("--eps", type=float, default=0.0)
    _common(p)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("simulate", help="run the post-processing pipeline (JSON report)")
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--e", type=float, required=True)
    p.add_argument("--b", type=_positive, default=1)
    p.add_argument("--ir", choices=("hash", "repetition", "hamming"), default="hash")
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--m", type=_positive, help="parameter-estimation samples (default n/10)")
    p.add_argument("--rep-length", type=_positive, default=5)
    p.add_argument("--key-out-a", help="write Alice's key as raw bytes")
    p.add_argument("--key-out-b", help="write Bob's key as raw bytes")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("finite-key", help="finite-size security parameters")
    p.add_argument("--N", type=_positive, required=True)
    p.add_argument("--b", type=_positive, default=1)
    p.add_argument("--eps", type=float, default=1e-9)
    p.add_argument("--m", type=_positive)
    p.add_argument("--k", type=_positive)
    p.add_argument("--dim-a", type=_positive, default=2)
    p.add_argument("--dim-b", type=_positive, default=2)
    p.add_argument("--alphabet", type=_positive, default=2)
    p.add_argument("--outcomes", type=_positive, default=2)
    p.add_argument("--protocol", choices=kr.PROTOCOLS, help="also compute the key length")
    p.add_argument("--e", type=_probability, default=0.0)
    p.add_argument("--q", type=_probability, default=0.0)
    _common(p)
    p.set_defaults(func=cmd_finite_key)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"qkdsec: error: {exc}", file=sys.stderr)
        return 2
    except kr.ThresholdError as exc:
        print(f"qkdsec: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"qkdsec: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
