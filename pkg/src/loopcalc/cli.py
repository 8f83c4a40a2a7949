"""Command-line front end.

Every subcommand prints one report (JSON by default, CSV with ``--format
csv``). Failures print a JSON error object and exit with the error's code:

  0 ok, 2 invalid parameter, 3 size guard, 4 sampling, 5 degenerate BP
  quantity, 6 numerical/resolution, 7 certification, 8 internal consistency,
  9 usage (unknown command, bad flags), 10 cache.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from . import bp as bp_mod
from . import exact as exact_mod
from . import loops as loops_mod
from . import thresholds as th
from .channel import BEC, BSC, ChannelSpec, sample_output
from .errors import (CacheError, DegenerateMessageError, LoopCalcError, ParameterError,
                     UsageError)
from .tanner import TannerGraph, design_rate, null_space, sample_graph

TABLE_ROWS = ((3, 4), (3, 5), (3, 6), (4, 6))


def derive_seed(seed: int, tag: int) -> int:
    """Independent stream for each consumer of the user seed."""
    return int(np.random.SeedSequence([seed, tag]).generate_state(1)[0])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    return x


# --- shared argument groups ----------------------------------------------------

def _int_list(text: str) -> list[int]:
    return [int(float(v)) for v in text.split(",") if v.strip()]


def _graph_args(p):
    p.add_argument("--l", type=int, default=3)
    p.add_argument("--r", type=int, default=6)
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--graph-in", type=Path, help="read a graph JSON instead of sampling")
    p.add_argument("--graph-out", type=Path, help="also write the graph JSON here")


def _channel_args(p, noise=0.1):
    p.add_argument("--channel", choices=(BEC, BSC), default=BSC)
    p.add_argument("--noise", type=float, default=noise)


def _load_graph(a) -> TannerGraph:
    if a.graph_in is not None:
        g = TannerGraph.from_json(a.graph_in.read_text())
    else:
        g = sample_graph(a.l, a.r, a.n, derive_seed(a.seed, 0))
    if a.graph_out is not None:
        a.graph_out.write_text(g.to_json())
    return g


def _realization(a, g):
    return sample_output(ChannelSpec(a.channel, a.noise), g.n, derive_seed(a.seed, 1))


# --- commands ------------------------------------------------------------------

def cmd_sample_graph(a):
    g = _load_graph(a)
    basis = null_space(g)
    return {"n": g.n, "m": g.m, "l": g.l, "r": g.r, "edges": g.edges,
            "rank": basis.rank, "dimension": len(basis.masks)}


def cmd_exact(a):
    if a.graph_in is None and a.n > exact_mod.EXACT_GUARD:
        from .errors import SizeGuardError
        raise SizeGuardError(f"n={a.n} exceeds exact-enumeration guard "
                             f"{exact_mod.EXACT_GUARD}", "n_le_guard")
    g = _load_graph(a)
    s = _realization(a, g)
    post = exact_mod.solve_exact(g, s, a.eta)
    out = {"n": g.n, "eta": a.eta, "symbols": s.s, "log_Z": post.log_Z, "phi": post.phi,
           "magnetization": post.magnetization, "marginals": post.marginals,
           "P_bit_sampling": None}
    if g.n <= exact_mod.PATTERN_GUARD:
        out["P_bit_sampling"] = exact_mod.bit_sampling_error(
            g, ChannelSpec(a.channel, a.noise), "exact-average", eta=a.eta).p_bit
    return out


def cmd_bp(a):
    g = _load_graph(a)
    s = _realization(a, g)
    res = bp_mod.bp_solve(g, s, a.eta, init=a.init, damping=a.damping,
                          max_iters=a.max_iters, tol=a.tol, seed=derive_seed(a.seed, 2))
    out = {"converged": res.converged, "iters": res.iters, "residual": res.residual,
           "symbols": s.s}
    try:
        out["bethe"] = bp_mod.bethe_free_entropy(g, s, a.eta, res.messages).value
    except LoopCalcError as err:
        out["bethe"] = None
        out["bethe_error"] = err.to_dict()
    return out


def cmd_loops_enumerate(a):
    g = _load_graph(a)
    masks = loops_mod.loop_masks(g)
    ferro = sorted(loops_mod.ferro_masks_from_enumeration(g))
    out = {"num_edges": g.num_edges, "num_loops": len(masks), "num_ferro_loops": len(ferro),
           "ferro_masks": ferro}
    if a.list_loops:
        out["loop_masks"] = masks
    return out


def cmd_loops_verify(a):
    g = _load_graph(a)
    s = _realization(a, g)
    basis = null_space(g)
    ferro = loops_mod.ferro_loop_series(g, basis, s, a.eta)
    from_words = {lp.mask for lp in loops_mod.enumerate_ferro_loops(g, basis)}
    out = {"symbols": s.s, "ferro_gap": ferro.gap, "ferro_num_loops": ferro.num_loops,
           "ferro_min_weight": ferro.min_weight}
    gaps = [ferro.gap]
    if g.num_edges <= loops_mod.LOOP_EDGE_GUARD:
        out["bijection_ok"] = from_words == loops_mod.ferro_masks_from_enumeration(g)
        try:
            res = bp_mod.bp_solve(g, s, a.eta, init="uniform", tol=1e-12,
                                  max_iters=a.max_iters)
        except DegenerateMessageError:
            res = None
        if res is None or not res.converged:
            res = bp_mod.bp_solve(g, s, a.eta, init="uniform", tol=1e-12, damping=0.5,
                                  max_iters=4 * a.max_iters)
        if res.converged:
            gen = loops_mod.loop_series_general(g, res.messages, s, a.eta, residual_tol=1e-12)
            out.update(general_gap=gen.gap, general_num_loops=gen.num_loops,
                       bp_residual=gen.bp_residual)
            gaps.append(gen.gap)
        else:
            out["general_gap"] = None
    out["identity_gap"] = max(gaps)
    return out


def cmd_mckay_check(a):
    y = [Fraction(v.strip()) for v in a.y.split(",") if v.strip()]
    rows = loops_mod.mckay_growth_rows(a.l, a.r, Fraction(a.rho), Fraction(a.x0),
                                       Fraction(a.xc), y,
                                       _int_list(a.n_values))
    return {"rows": [dict(row.__dict__) for row in rows]}


def cmd_exponent(a):
    rho = a.rho if a.rho is not None else a.noise
    if a.channel == BEC:
        cert = th.alpha_bec(rho, a.eta, a.l, a.r, a.delta_ball, a.grid)
    else:
        cert = th.alpha_bsc(rho, a.noise, a.eta, a.l, a.r, a.delta_ball, a.grid)
    return cert.to_dict()


def cmd_threshold(a):
    res = th.threshold_bisect(a.channel, a.l, a.r, a.tol, a.grid, a.delta_ball)
    return res.to_dict()


def cmd_lemma1(a):
    return th.lemma1_eta_window(a.channel, a.l, a.r, a.noise, a.delta_ball, a.grid).to_dict()


def cmd_lemma2(a):
    return th.lemma2_rho_stability(a.channel, a.l, a.r, a.noise, _int_list(a.n_values),
                                   a.delta_ball, a.grid).to_dict()


def cmd_simulate(a):
    g = _load_graph(a)
    spec = ChannelSpec(a.channel, a.noise)
    res = exact_mod.bit_sampling_error(g, spec, a.mode, a.samples, derive_seed(a.seed, 3),
                                       a.eta, a.workers)
    out = {"p_bit": res.p_bit, "stderr": res.stderr, "mode": res.mode, "samples": res.samples}
    if a.derivative:
        rep = exact_mod.free_entropy_derivative_identity_check(
            g, spec, None if a.mode == "exact-average" else a.samples, derive_seed(a.seed, 4))
        out["derivative"] = dict(rep.__dict__)
    return out


def _compute_table(family: str, grid: int, tol: float) -> list[dict]:
    rows = []
    for l, r in TABLE_ROWS:
        ref = th.REFERENCE[family][(l, r)]
        res = th.threshold_bisect(family, l, r, tol, grid)
        rows.append({"channel": family, "l": l, "r": r, "R_des": design_rate(l, r),
                     "bp_ref": ref["bp"], "loop": res.threshold, "loop_ref": ref["loop"],
                     "map_ref": ref["map"], "shannon_ref": ref["shannon"]})
    return rows


def cmd_tables(a):
    families = (BEC, BSC) if a.channel == "both" else (a.channel,)
    cache = {}
    if a.cache is not None and a.cache.exists():
        cache = json.loads(a.cache.read_text())
    rows = []
    for fam in families:
        if fam not in cache:
            if a.no_compute:
                raise CacheError(f"no cached {fam} table and --no-compute given", "cache_present")
            cache[fam] = _jsonable(_compute_table(fam, a.grid, a.tol))
        rows.extend(cache[fam])
    if a.cache is not None and not a.no_compute:
        a.cache.write_text(json.dumps(cache, sort_keys=True, indent=1))
    return {"rows": rows}


COMMANDS = {
    "sample-graph": cmd_sample_graph,
    "exact": cmd_exact,
    "bp": cmd_bp,
    "loops-enumerate": cmd_loops_enumerate,
    "loops-verify": cmd_loops_verify,
    "mckay-check": cmd_mckay_check,
    "exponent": cmd_exponent,
    "threshold": cmd_threshold,
    "lemma1": cmd_lemma1,
    "lemma2": cmd_lemma2,
    "simulate": cmd_simulate,
    "tables": cmd_tables,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, "valid_command_line")


def build_parser() -> argparse.ArgumentParser:
    root = _Parser(prog="loopcalc", description=__doc__.splitlines()[0])
    root.add_argument("--version", action="version", version=__version__)
    sub = root.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--output", type=Path, help="write the report here instead of stdout")
        p.add_argument("--config", type=Path, help="TOML file of default flag values")
        return p

    p = add("sample-graph", "sample a simple (l, r)-regular Tanner graph")
    _graph_args(p)

    p = add("exact", "exact free entropy and marginals by codeword enumeration")
    _graph_args(p)
    _channel_args(p)
    p.add_argument("--eta", type=float, default=0.0)

    p = add("bp", "run belief propagation and report the Bethe free entropy")
    _graph_args(p)
    _channel_args(p)
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--init", choices=("uniform", "ferromagnetic", "random"), default="uniform")
    p.add_argument("--damping", type=float, default=0.0)
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-10)

    p = add("loops-enumerate", "enumerate generalized and ferromagnetic loops")
    _graph_args(p)
    p.add_argument("--list-loops", action="store_true")

    p = add("loops-verify", "check the loop-series identities on one instance")
    _graph_args(p)
    _channel_args(p)
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--max-iters", type=int, default=10_000)

    p = add("mckay-check", "compare the McKay count with the rate function f")
    p.add_argument("--l", type=int, default=3)
    p.add_argument("--r", type=int, default=6)
    p.add_argument("--rho", type=str, default="1/4")
    p.add_argument("--x0", type=str, default="1/3")
    p.add_argument("--xc", type=str, default="8/15")
    p.add_argument("--y", type=str, default="1/2,1/5,1/12")
    p.add_argument("--n-values", type=str, default="120,240,480")

    def exponent_args(p):
        p.add_argument("--channel", choices=(BEC, BSC), default=BEC)
        p.add_argument("--l", type=int, default=3)
        p.add_argument("--r", type=int, default=6)
        p.add_argument("--grid", type=int, default=th.GRID)
        p.add_argument("--delta-ball", type=float, default=th.DELTA_BALL)

    p = add("exponent", "maximize the loop-series exponent at (rho, eta)")
    exponent_args(p)
    p.add_argument("--rho", type=float, default=None, help="defaults to --noise")
    p.add_argument("--noise", type=float, default=0.4)
    p.add_argument("--eta", type=float, default=0.0)

    p = add("threshold", "bisect for the loop threshold")
    exponent_args(p)
    p.add_argument("--tol", type=float, default=1e-4)

    p = add("lemma1", "certified eta window around zero")
    exponent_args(p)
    p.add_argument("--noise", type=float, default=0.4)

    p = add("lemma2", "stability of the certificate under rho perturbations")
    exponent_args(p)
    p.add_argument("--noise", type=float, default=0.4)
    p.add_argument("--n-values", type=str, default="1000,10000,100000")

    p = add("simulate", "bit-sampling decoder error probability")
    _graph_args(p)
    _channel_args(p)
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--mode", choices=("exact-average", "monte-carlo"), default="exact-average")
    p.add_argument("--samples", type=int, default=0)
    p.add_argument("--derivative", action="store_true")

    p = add("tables", "regenerate the loop-threshold tables")
    p.add_argument("--channel", choices=(BEC, BSC, "both"), default="both")
    p.add_argument("--grid", type=int, default=th.GRID)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--cache", type=Path)
    p.add_argument("--no-compute", action="store_true")
    return root


def parse(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    a = parser.parse_args(argv)
    if a.command is None:
        raise UsageError("no command given", "valid_command_line")
    if a.config is not None:
        try:
            conf = tomllib.loads(a.config.read_text())
        except (OSError, tomllib.TOMLDecodeError) as err:
            raise ParameterError(f"cannot read config: {err}", "config_readable") from err
        sub = parser._subparsers._group_actions[0].choices[a.command]
        known = {act.dest for act in sub._actions}
        extra = set(k.replace("-", "_") for k in conf) - known
        if extra:
            raise ParameterError(f"unknown config keys {sorted(extra)}", "config_keys")
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in conf.items()})
        a = parser.parse_args(argv)
    return a


def _params(a) -> dict:
    skip = {"command", "output", "format", "config", "workers"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(a).items())
            if k not in skip}


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    result = report["result"]
    rows = result["rows"] if isinstance(result.get("rows"), list) else [result]
    flat = [_flatten(r) for r in rows]
    header = sorted({k for r in flat for k in r})
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    w.writerows(flat)
    return buf.getvalue()


def dispatch(argv: list[str]) -> tuple[int, str]:
    """Run one command line; returns (exit status, rendered report)."""
    fmt = "csv" if "--format" in argv and "csv" in argv else "json"
    output = None
    try:
        a = parse(argv)
        fmt, output = a.format, a.output
        result = COMMANDS[a.command](a)
        report = _jsonable({"command": a.command, "version": __version__,
                            "params": _params(a), "result": result,
                            "timestamp": datetime.now(timezone.utc).isoformat()})
        text, code = render(report, fmt), 0
    except LoopCalcError as err:
        text, code = json.dumps({"error": err.to_dict()}, sort_keys=True) + "\n", err.code
    if output is not None and code == 0:
        Path(output).write_text(text)
        return code, ""
    return code, text


def main(argv: list[str] | None = None) -> int:
    code, text = dispatch(sys.argv[1:] if argv is None else argv)
    if text:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
