"""Experiment driver with deterministic, machine-readable outputs.

Every subcommand writes key-value text and/or CSV files into the output
directory; each file starts with a header carrying the artifact version, a
hash of the effective configuration, and the seed, so identical
configurations produce byte-identical outputs.  A flat key-value config file
can pre-set any flag; explicit flags win.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from fractions import Fraction
from typing import Optional

from . import __version__
from .congestion import (
    bottleneck_report,
    canonical_congestion,
    directed_cycle,
    ergodicity_report,
)
from .coupling import (
    COUPLING_KINDS,
    coupling_time,
    hamming_contraction_rows,
    weighted_metric_contraction_rows,
)
from .domain import Graph, TargetGraph, to_signs
from .dynamics import DEFAULT_SEED, ChainSpec, RandomTape
from .kernels import (
    NonErgodicError,
    build_kernel,
    build_sign_kernel,
    lump_kernel,
    max_tv_to_uniform,
    poincare_constant,
    tv_mixing_time,
    verify_comparison,
)
from .percolation import lb_experiment, segment_layout
from .wilson import estimate_rho, wilson_bounds

SUBCOMMANDS = (
    "spectrum", "mix", "wilson", "drift", "couple",
    "percolate", "compare", "congestion", "ergodic",
)


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".12g")
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    return str(x)


class Report:
    """Accumulates output files and writes them with deterministic headers."""

    def __init__(self, config: dict, out_dir: str):
        self.config = config
        self.out_dir = out_dir
        items = ",".join(f"{k}={_fmt(v)}" for k, v in sorted(config.items()))
        self.config_hash = hashlib.sha256(items.encode()).hexdigest()[:12]

    def header(self) -> str:
        lines = [
            f"# artifact: scanmix {__version__}",
            f"# config-hash: {self.config_hash}",
            f"# seed: {self.config.get('seed', DEFAULT_SEED)}",
        ]
        for k, v in sorted(self.config.items()):
            if k != "seed":
                lines.append(f"# {k}: {_fmt(v)}")
        return "\n".join(lines) + "\n"

    def write(self, name: str, body: str) -> str:
        os.makedirs(self.out_dir, exist_ok=True)
        path = os.path.join(self.out_dir, name)
        with open(path, "w") as fh:
            fh.write(self.header())
            fh.write(body)
        return path


def _kv_block(pairs) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in pairs)


def _chain_fields(args) -> tuple[str, bool]:
    if args.chain == "lazy":
        return "glauber", True
    if args.chain == "reverse":
        return "reverse_scan", False
    return args.chain, False


def _target_from_args(args) -> Optional[TargetGraph]:
    if args.h_file:
        with open(args.h_file) as fh:
            return TargetGraph.from_text(fh.read(), directed=args.directed)
    return None


def _graph_from_args(args) -> Graph:
    if args.graph_file:
        with open(args.graph_file) as fh:
            return Graph.from_text(fh.read())
    return Graph.path(args.n)


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def cmd_spectrum(args, report: Report) -> int:
    g = _graph_from_args(args)
    base, lazy = _chain_fields(args)
    target = _target_from_args(args)
    spec = ChainSpec(
        graph=g,
        q=None if target else args.q,
        target=target,
        base=base,
        lazy=lazy,
        clamp=frozenset(args.clamp),
    )
    kernel = build_kernel(spec)
    rep = poincare_constant(kernel)
    lines = [f"{v:.15g}" for v in rep.eigenvalues]
    report.write("spectrum.csv", "\n".join(lines) + "\n")
    pairs = [
        ("n_states", len(kernel.states)),
        ("poincare", rep.poincare),
        ("beta_min", rep.beta_min),
        ("row_sums_exact", kernel.row_sums_exact()),
        ("uniform_stationary", kernel.uniform_is_stationary()),
        ("small_n_caveat", g.small_n_caveat),
    ]
    if (
        spec.q == 3
        and g.kind == "path"
        and base in ("glauber", "scan")
        and not lazy
        and not spec.clamp
    ):
        lumped = lump_kernel(kernel, to_signs)
        if lumped is not None:
            srep = poincare_constant(lumped)
            pairs += [
                ("sign_lumped_states", len(lumped.states)),
                ("sign_lumped_poincare", srep.poincare),
            ]
    report.write("spectrum.txt", _kv_block(pairs))
    print(f"spectrum: {len(kernel.states)} states, poincare = {rep.poincare:.12g}")
    return 0


def cmd_mix(args, report: Report) -> int:
    g = _graph_from_args(args)
    base, lazy = _chain_fields(args)
    target = _target_from_args(args)
    spec = ChainSpec(
        graph=g, q=None if target else args.q, target=target, base=base, lazy=lazy
    )
    kernel = build_kernel(spec)
    try:
        t_mix = tv_mixing_time(kernel, args.eps)
    except NonErgodicError as exc:
        body = _kv_block(
            [("ergodic", False), ("n_classes", len(exc.classes))]
            + [(f"class_{i}_size", len(c)) for i, c in enumerate(exc.classes)]
        )
        report.write("mix.txt", body)
        print("mix: chain is not ergodic; class sizes written")
        return 0
    P = kernel.dense()
    rows = []
    t, M = 1, P
    while t <= t_mix:
        rows.append(f"{t},{max_tv_to_uniform(M):.15g}")
        M = M @ M
        t *= 2
    report.write("mix.csv", "t,max_tv\n" + "\n".join(rows) + "\n")
    report.write(
        "mix.txt",
        _kv_block(
            [("eps", args.eps), ("mixing_time", t_mix), ("n_states", len(kernel.states))]
        ),
    )
    print(f"mix: Mix({args.eps}) = {t_mix} ({len(kernel.states)} states)")
    return 0


def cmd_wilson(args, report: Report) -> int:
    base, _ = _chain_fields(args)
    if base not in ("glauber", "scan"):
        raise SystemExit("wilson: --chain must be glauber or scan")
    tape = RandomTape(args.seed)
    rep = wilson_bounds(base, args.n, tape=tape, trials=args.replicates)
    est = estimate_rho(base, args.n, trials=args.replicates, tape=tape)
    report.write(
        "wilson_w.csv",
        "i,w_i\n" + "\n".join(f"{i + 1},{w:.15g}" for i, w in enumerate(rep.w)) + "\n",
    )
    report.write(
        "wilson.txt",
        _kv_block(
            [
                ("kind", rep.kind),
                ("n", rep.n),
                ("lambda", rep.lam),
                ("c_n", rep.c_n),
                ("phi0", rep.phi0),
                ("rho", rep.rho),
                ("rho_is_empirical", rep.rho_is_empirical),
                ("max_increment", est.max_increment),
                ("nu", rep.nu),
                ("lower_bound_half", rep.lower_bound),
                ("upper_bound_eps", rep.upper_bound(args.eps)),
                ("asymptotic_reference", rep.asymptotic_reference),
            ]
        ),
    )
    print(
        f"wilson: {base} n={args.n} lambda={rep.lam:.12g} "
        f"lower={rep.lower_bound:.6g} upper({args.eps})={rep.upper_bound(args.eps):.6g}"
    )
    return 0


def cmd_drift(args, report: Report) -> int:
    if args.q == 3:
        rows = weighted_metric_contraction_rows(args.n)
    else:
        rows = hamming_contraction_rows(args.n, args.q)
    lines = ["lemma_id,n,pair_index,exact_drift_num,exact_drift_den,bound,pass"]
    for r in rows:
        lines.append(
            f"{r.lemma_id},{r.n},{r.pair_index},{r.value.numerator},"
            f"{r.value.denominator},{_fmt(r.bound)},{int(r.passed)}"
        )
    report.write("drift.csv", "\n".join(lines) + "\n")
    n_fail = sum(1 for r in rows if not r.passed)
    report.write(
        "drift.txt",
        _kv_block([("rows", len(rows)), ("failures", n_fail), ("q", args.q), ("n", args.n)]),
    )
    print(f"drift: {len(rows)} rows, {n_fail} failures")
    return 0 if n_fail == 0 else 1


def cmd_couple(args, report: Report) -> int:
    base, lazy = _chain_fields(args)
    g = Graph.path(args.n)
    spec = ChainSpec(graph=g, q=args.q, base=base, lazy=lazy)
    kind = args.coupling
    if kind not in COUPLING_KINDS:
        raise SystemExit(f"couple: unknown coupling {kind}")
    tape = RandomTape(args.seed)
    stats = coupling_time(spec, kind, args.replicates, tape)
    body = ["replicate,time,censored"]
    for i, t in enumerate(stats.times):
        body.append(f"{i},{t},{int(t >= stats.horizon)}")
    report.write("couple.csv", "\n".join(body) + "\n")
    report.write(
        "couple.txt",
        _kv_block(
            [
                ("coupling", kind),
                ("replicates", args.replicates),
                ("median", stats.median),
                ("mean", stats.mean),
                ("q90", stats.quantile(0.9)),
                ("censored", stats.censored),
                ("horizon", stats.horizon),
            ]
        ),
    )
    print(f"couple: median={stats.median} mean={stats.mean:.3g} censored={stats.censored}")
    return 0


def cmd_percolate(args, report: Report) -> int:
    layout = segment_layout(
        args.n, args.q, override=(args.r, args.ell) if args.r else None
    )
    base, _ = _chain_fields(args)
    tape = RandomTape(args.seed)
    rep = lb_experiment(layout, args.t, args.replicates, tape, base=base)
    head = _kv_block(
        [
            ("n", layout.n),
            ("q", layout.q),
            ("r", layout.r),
            ("ell", layout.ell),
            ("k", layout.k),
            ("m", layout.m),
            ("overridden", layout.overridden),
            ("threshold", layout.threshold),
            ("percolation_contained", rep.percolation_contained),
        ]
    )
    csv = (
        "t,free_tail,clamped_tail,disagreement_rate,tv_lower_estimate\n"
        f"{rep.t},{rep.free_tail:.12g},{rep.clamped_tail:.12g},"
        f"{rep.disagreement_rate:.12g},{rep.tv_lower_estimate:.12g}\n"
    )
    report.write("percolate.txt", head)
    report.write("percolate.csv", csv)
    print(
        f"percolate: free_tail={rep.free_tail:.4g} clamped_tail={rep.clamped_tail:.4g} "
        f"disagreement={rep.disagreement_rate:.4g} tv>={rep.tv_lower_estimate:.4g}"
    )
    return 0


def cmd_compare(args, report: Report) -> int:
    g = _graph_from_args(args)
    target = _target_from_args(args) or TargetGraph.clique(args.q)
    rep = verify_comparison(g, target, eps=args.eps)
    report.write(
        "compare.txt",
        _kv_block(
            [
                ("n", rep.n),
                ("q", rep.q),
                ("max_degree", rep.max_degree),
                ("n_states", rep.n_states),
                ("trivial", rep.trivial),
                ("poincare_site", rep.poincare_site),
                ("poincare_sweep", rep.poincare_sweep),
                ("site_factor", rep.site_factor),
                ("site_le_sweep_ok", rep.site_le_sweep_ok),
                ("site_slack", rep.site_slack),
                ("sweep_factor", rep.sweep_factor),
                ("sweep_le_site_ok", rep.sweep_le_site_ok),
                ("sweep_slack", rep.sweep_slack),
                ("continuized_sweep_bound", rep.continuized_sweep_bound),
                ("lazy_site_bound", rep.lazy_site_bound),
                ("sweep_mix_at_1_over_e", rep.sweep_mix_at_1_over_e),
                ("mix_square_bound_ok", rep.mix_square_bound_ok),
            ]
        ),
    )
    ok = rep.site_le_sweep_ok and rep.sweep_le_site_ok
    print(f"compare: both inequalities hold = {ok}")
    return 0 if ok else 1


def cmd_congestion(args, report: Report) -> int:
    target = _target_from_args(args) or TargetGraph.clique(args.q)
    rep = canonical_congestion(args.n, target)
    report.write(
        "congestion.txt",
        _kv_block(
            [
                ("n", rep.n),
                ("t", rep.t),
                ("n_states", rep.n_states),
                ("congestion", rep.congestion),
                ("poincare_lower_bound", rep.poincare_lower_bound),
                ("max_paths_through_edge", rep.max_paths_through_edge),
                ("max_path_length", rep.max_path_length),
                ("length_bound", rep.length_bound),
                ("encoding_bound", rep.encoding_bound),
                ("paths_valid", rep.paths_valid),
            ]
        ),
    )
    print(f"congestion: t={rep.t} A={rep.congestion} valid={rep.paths_valid}")
    return 0 if rep.paths_valid else 1


def cmd_ergodic(args, report: Report) -> int:
    g = _graph_from_args(args)
    target = _target_from_args(args)
    pairs = []
    if target is None:
        target = directed_cycle(3)
        pairs.append(("target", "directed-3-cycle"))
    rep = ergodicity_report(g, target)
    pairs += [
        ("n_states", rep.n_states),
        ("n_classes", rep.n_classes),
        ("class_sizes", " ".join(map(str, rep.class_sizes))),
    ]
    if args.bottleneck_k:
        b = bottleneck_report(args.bottleneck_k, args.n)
        pairs += [
            ("bottleneck_k", b.k),
            ("bottleneck_states", b.n_states),
            ("bottleneck_pi_a", b.pi_a),
            ("bottleneck_pi_m", b.pi_m),
            ("bottleneck_bound", b.bound),
        ]
    report.write("ergodic.txt", _kv_block(pairs))
    print(f"ergodic: {rep.n_classes} classes, sizes {rep.class_sizes}")
    return 0


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------

# per-subcommand defaults, applied where neither a flag nor the config file
# supplied a value; chosen so every subcommand runs in seconds out of the box
SUBCOMMAND_DEFAULTS: dict[str, dict] = {
    "spectrum": dict(n=4, q=3, chain="glauber"),
    "mix": dict(n=4, q=3, chain="glauber", eps=0.25),
    "wilson": dict(n=12, chain="glauber", replicates=512, eps=0.25),
    "drift": dict(n=6, q=3),
    "couple": dict(n=32, q=4, chain="scan", coupling="q4_scan", replicates=48),
    "percolate": dict(n=10000, q=4, r=2, ell=10, t=1, replicates=200, chain="scan"),
    "compare": dict(n=4, q=3, eps=0.25),
    "congestion": dict(n=4, q=3),
    "ergodic": dict(n=4, q=3, bottleneck_k=2),
}

GLOBAL_DEFAULTS: dict[str, object] = dict(
    n=4, q=3, chain="glauber", replicates=64, eps=0.25, t=1,
    coupling="q4_scan", bottleneck_k=None, r=None, ell=None,
)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="scanmix",
        description="exact and empirical mixing analysis for single-site coloring dynamics",
    )
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--n", type=int, default=None, help="path length / vertex count")
    p.add_argument("--q", type=int, default=None, help="number of colors (clique model)")
    p.add_argument("--h-file", default=None, help="target graph as 0/1 adjacency rows")
    p.add_argument("--directed", action="store_true", help="read --h-file as directed")
    p.add_argument("--graph-file", default=None, help="underlying graph as an edge list")
    p.add_argument(
        "--chain", choices=("glauber", "scan", "reverse", "lazy"), default=None
    )
    p.add_argument("--clamp", type=int, nargs="*", default=[], help="clamped vertex ids")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--coupling", default=None, help="coupling kind for couple")
    p.add_argument("--t", type=int, default=None, help="time horizon (percolate)")
    p.add_argument("--r", type=int, default=None, help="segment override r (percolate)")
    p.add_argument("--ell", type=int, default=None, help="segment override ell (percolate)")
    p.add_argument("--bottleneck-k", type=int, default=None, help="two-clique hub size")
    return p


def _fill_defaults(args: argparse.Namespace) -> None:
    per = SUBCOMMAND_DEFAULTS.get(args.subcommand, {})
    for key, val in {**GLOBAL_DEFAULTS, **per}.items():
        if getattr(args, key, None) is None:
            setattr(args, key, val)


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Fold config-file values in as defaults; explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    valid = {a.dest for a in parser._actions}
    overrides = {}
    with open(known.config) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SystemExit(f"config: malformed line {line!r}")
            key, val = (x.strip() for x in line.split("=", 1))
            dest = key.replace("-", "_")
            if dest not in valid:
                raise SystemExit(f"config: unknown field {key!r}")
            overrides[dest] = val
    for action in parser._actions:
        if action.dest in overrides:
            raw = overrides[action.dest]
            if action.type is int:
                action.default = int(raw)
            elif action.type is float:
                action.default = float(raw)
            elif action.nargs == "*":
                action.default = [int(x) for x in raw.split()]
            elif isinstance(action, argparse._StoreTrueAction):
                action.default = raw.lower() in ("1", "true", "yes")
            else:
                action.default = raw
    return argv


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 2
        return exc.code if exc.code is not None else 2
    if (args.r is None) != (args.ell is None):
        print("error: --r and --ell must be given together", file=sys.stderr)
        return 2
    _fill_defaults(args)
    config = {
        k: v
        for k, v in vars(args).items()
        if k not in ("out", "config") and v is not None
    }
    config["clamp"] = " ".join(map(str, args.clamp))
    report = Report(config, args.out)
    handlers = {
        "spectrum": cmd_spectrum,
        "mix": cmd_mix,
        "wilson": cmd_wilson,
        "drift": cmd_drift,
        "couple": cmd_couple,
        "percolate": cmd_percolate,
        "compare": cmd_compare,
        "congestion": cmd_congestion,
        "ergodic": cmd_ergodic,
    }
    try:
        return handlers[args.subcommand](args, report)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
