"""Command-line pipeline: gen-model, sample, reduce, compare.

Exit codes: 0 success, 2 usage or validation error, 3 numeric failure while
sampling or evaluating, 4 reduction failure.
"""

import argparse
import os
import sys
import warnings

import numpy as np

from .errors import (
    Breakdown,
    DisjointnessViolation,
    IndefiniteGramian,
    MissingDamping,
    ParseError,
    RankDeficient,
    SingularBlock,
    SingularPencil,
    SODBTError,
    SpectraOverlap,
    UnstableSystem,
)
from .evaluation import ExpSineInput, export_plot_data, h2_error, hinf_error_grid, simulate_time
from .gramians import bt_reduce, lyapunov_velocity_gramians
from .model import (
    BENCH_JITTER,
    BENCH_MASS,
    BENCH_STIFFNESS,
    ReducedModel,
    first_order_poles,
    is_stable,
    load_model_with_provenance,
    save_model,
    synth_msd_chain,
)
from .quadrature import offset_rule_pair
from .sampling import export_samples, import_samples, sample_model

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_REDUCTION = 4


class UsageError(SODBTError):
    """Invalid flag value or input file; maps to exit code 2."""


class NumericFailure(SODBTError):
    """Failure while sampling or evaluating; maps to exit code 3."""


class ReductionFailure(SODBTError):
    """Failure inside a reduction algorithm; maps to exit code 4."""


# --------------------------------------------------------------------------
# helpers


def _require(cond, flag, msg):
    if not cond:
        raise UsageError(f"{flag}: {msg}")


def _file_kind(path):
    if not os.path.isfile(path):
        raise UsageError(f"{path}: no such file")
    with open(path) as fh:
        first = fh.readline().split()
    return first[0] if first else ""


def _load_model(path):
    if _file_kind(path) != "so-model":
        raise UsageError(f"{path}: not a model file")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return load_model_with_provenance(path)
    except (ParseError, SODBTError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _load_samples(path):
    try:
        return import_samples(path)
    except (ParseError, SODBTError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _fmt_sv(sv, r, tail=5):
    sv = np.asarray(sv)
    lo = max(r - tail, 0)
    hi = min(r + tail, sv.size)
    return " ".join(f"{v:.3e}" for v in sv[lo:hi])


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"--config {path}:{lineno}: expected 'key = value'")
            key, val = (t.strip() for t in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


# --------------------------------------------------------------------------
# commands


def cmd_gen_model(args):
    _require(args.n >= 1, "--n", "must be >= 1")
    _require(args.alpha >= 0, "--alpha", "must be >= 0")
    _require(args.beta >= 0, "--beta", "must be >= 0")
    _require(args.mass > 0, "--mass", "must be > 0")
    _require(args.stiffness > 0, "--stiffness", "must be > 0")
    _require(0 <= args.jitter < 1, "--jitter", "must lie in [0, 1)")
    inp = args.n // 2 if args.input is None else args.input
    out = inp if args.output is None else args.output
    _require(0 <= inp < args.n, "--input", f"must lie in [0, {args.n})")
    _require(0 <= out < args.n, "--output", f"must lie in [0, {args.n})")
    sys_ = synth_msd_chain(args.n, masses=args.mass, stiffnesses=args.stiffness, alpha=args.alpha,
                           beta=args.beta, input_node=inp, output_node=out,
                           jitter=args.jitter, seed=args.seed)
    save_model(sys_, args.output_file)
    poles = first_order_poles(sys_)
    print(f"wrote {args.output_file}: n={sys_.n} input={inp} output={out}")
    print(f"stable={'yes' if is_stable(sys_) else 'no'} max_re_pole={poles.real.max():.6e}")
    return EXIT_OK


def cmd_sample(args):
    _require(args.lo > 0, "--lo", "must be > 0")
    _require(args.hi > args.lo, "--hi", "must exceed --lo")
    _require(args.nu >= 2, "--nu", "must be >= 2")
    sys_, _ = _load_model(args.model)
    p, q = offset_rule_pair(args.lo, args.hi, args.nu)
    try:
        samples = sample_model(sys_, p, q, provenance=os.path.basename(args.model))
    except (MissingDamping, DisjointnessViolation) as exc:
        raise UsageError(str(exc)) from exc
    except SingularPencil as exc:
        raise NumericFailure(f"sampling failed: {exc}") from exc
    export_samples(samples, args.output_file)
    print(f"wrote {args.output_file}: nu_p={p.nu} nu_q={q.nu} band=[{args.lo:g}, {args.hi:g}]")
    return EXIT_OK


def cmd_reduce(args):
    kind = _file_kind(args.input_file)
    if args.r is not None:
        _require(args.r >= 1, "-r", "must be >= 1")
    _require(args.m >= 1, "-m", "must be >= 1")
    if args.method == "bt":
        if kind != "so-model":
            raise UsageError("--method bt: intrusive method needs a model file, got samples")
        sys_, _ = _load_model(args.input_file)
    else:
        if kind != "so-samples":
            raise UsageError(f"--method {args.method}: data-driven method needs a sample file")
        samples = _load_samples(args.input_file)
    try:
        if args.method == "bt":
            factors = lyapunov_velocity_gramians(sys_)
            if args.r is None:
                from .gramians import default_rank, velocity_singular_values
                r = default_rank(velocity_singular_values(sys_.M, factors.U, factors.L))
            else:
                r = args.r
            red = bt_reduce(sys_, factors, r)
        elif args.method == "data-bt":
            from .databt import databt_reduce
            red = databt_reduce(samples, args.r)
        else:
            from .sylvester import krydatabt_reduce
            red = krydatabt_reduce(samples, args.r, args.m)
    except (RankDeficient, Breakdown, UnstableSystem, IndefiniteGramian, SingularBlock,
            SpectraOverlap, SingularPencil, np.linalg.LinAlgError) as exc:
        raise ReductionFailure(f"{args.method} failed: {type(exc).__name__}: {exc}") from exc
    save_model(red, args.output_file)
    print(f"wrote {args.output_file}: method={red.method} r={red.r}")
    print(f"singular values near r: {_fmt_sv(red.singular_values, red.r)}")
    for note in red.warnings:
        print(f"warning: {note}")
    return EXIT_OK


def _label(path, prov):
    method = prov.get("method", "full")
    r = prov.get("r")
    return f"{method}" + (f"(r={r})" if r else "")


def cmd_compare(args):
    _require(args.lo > 0, "--lo", "must be > 0")
    _require(args.hi > args.lo, "--hi", "must exceed --lo")
    _require(args.count >= 2, "--count", "must be >= 2")
    _require(args.t_end > 0, "--t-end", "must be > 0")
    _require(args.steps >= 2, "--steps", "must be >= 2")
    _require(args.a >= 0, "--a", "must be >= 0")
    full, _ = _load_model(args.full)
    reds = []
    for path in args.reduced:
        sysr, prov = _load_model(path)
        method = prov.get("method", "full")
        reds.append((path, ReducedModel(sysr, method, sysr.n, np.empty(0)), _label(path, prov)))
    u = ExpSineInput(args.a, args.b)
    rows = []
    try:
        responses = [simulate_time(full, u, args.t_end, args.steps)]
        for i, (path, red, label) in enumerate(reds):
            rep = hinf_error_grid(full, red, args.lo, args.hi, args.count)
            h2 = h2_error(full, red)
            rows.append((label, red.r, rep.hinf_rel, h2.rel, rep.trusted, h2.consistent))
            if args.prefix:
                export_plot_data(rep, f"{args.prefix}_bode_{i}.dat")
            tr = simulate_time(red, u, args.t_end, args.steps)
            tr.tag = f"{i}"
            responses.append(tr)
    except (SingularPencil, UnstableSystem, np.linalg.LinAlgError) as exc:
        raise NumericFailure(f"evaluation failed: {type(exc).__name__}: {exc}") from exc
    if args.prefix:
        responses[0].tag = "full"
        export_plot_data(responses, f"{args.prefix}_time.dat")
    print(f"{'model':<28} {'r':>4} {'hinf_rel':>12} {'h2_rel':>12}")
    for label, r, hinf, h2, trusted, ok in rows:
        flags = ("" if trusted else " hinf-untrusted") + ("" if ok else " h2-disagree")
        print(f"{label:<28} {r:>4d} {hinf:>12.4e} {h2:>12.4e}{flags}")
    print(f"input: {u.describe()} t_end={args.t_end:g} steps={args.steps}")
    y_full = responses[0].outputs
    peak = np.abs(y_full).max()
    for (path, red, label), tr in zip(reds, responses[1:]):
        dev = np.abs(tr.outputs - y_full).max()
        rel = dev / peak if peak > 0 else dev
        print(f"time {label:<23} max|y-y_r|/max|y| = {rel:.4e}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(prog="sodbt", description="Second-order data-driven balanced truncation")
    parser.add_argument("--config", help="key = value file; command-line flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-model", help="write a mass-spring-damper chain model")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--alpha", type=float, default=0.0)
    g.add_argument("--beta", type=float, default=0.0)
    g.add_argument("--mass", type=float, default=BENCH_MASS)
    g.add_argument("--stiffness", type=float, default=BENCH_STIFFNESS)
    g.add_argument("--jitter", type=float, default=BENCH_JITTER)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--input", type=int, default=None, help="input node, default n // 2")
    g.add_argument("--output", type=int, default=None, help="output node, default = input")
    g.add_argument("-o", dest="output_file", required=True)
    g.set_defaults(func=cmd_gen_model)

    s = sub.add_parser("sample", help="sample a model on offset P/Q quadrature nodes")
    s.add_argument("model")
    s.add_argument("--lo", type=float, default=1e-2)
    s.add_argument("--hi", type=float, default=1e4)
    s.add_argument("--nu", type=int, default=500, help="nodes per side")
    s.add_argument("-o", dest="output_file", required=True)
    s.set_defaults(func=cmd_sample)

    r = sub.add_parser("reduce", help="reduce a model (bt) or a sample set (data-bt, krydata-bt)")
    r.add_argument("input_file")
    r.add_argument("--method", choices=("bt", "data-bt", "krydata-bt"), required=True)
    r.add_argument("-r", type=int, default=None, help="reduced order")
    r.add_argument("-m", type=int, default=30, help="extended Krylov iterations")
    r.add_argument("-o", dest="output_file", required=True)
    r.set_defaults(func=cmd_reduce)

    c = sub.add_parser("compare", help="error table and plot data for reduced models")
    c.add_argument("full")
    c.add_argument("reduced", nargs="+")
    c.add_argument("--lo", type=float, default=1e-2)
    c.add_argument("--hi", type=float, default=1e4)
    c.add_argument("--count", type=int, default=2000)
    c.add_argument("--a", type=float, default=1.0, help="input decay rate")
    c.add_argument("--b", type=float, default=1.0, help="input frequency")
    c.add_argument("--t-end", type=float, default=20.0)
    c.add_argument("--steps", type=int, default=4000)
    c.add_argument("--prefix", default=None, help="write <prefix>_bode_<i>.dat and <prefix>_time.dat")
    c.set_defaults(func=cmd_compare)
    return parser


def _apply_config(parser, argv):
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    probe.add_argument("command", nargs="?")
    pre, _ = probe.parse_known_args(argv)
    if not pre.config or pre.command not in parser._subparsers._group_actions[0].choices:
        return parser.parse_args(argv)
    if not os.path.isfile(pre.config):
        raise UsageError(f"--config: {pre.config}: no such file")
    cfg = read_config(pre.config)
    subparser = parser._subparsers._group_actions[0].choices[pre.command]
    known = {a.dest: a for a in subparser._actions if a.option_strings}
    typed = {}
    for key, val in cfg.items():
        if key not in known:
            raise UsageError(f"--config: unknown key {key!r} for {pre.command}")
        conv = known[key].type or str
        try:
            typed[key] = conv(val)
        except ValueError:
            raise UsageError(f"--config: bad value {val!r} for {key}") from None
        known[key].required = False
    subparser.set_defaults(**typed)
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ReductionFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REDUCTION
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
