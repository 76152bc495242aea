"""Command-line interface.

Every subcommand accepts ``--config FILE`` (TOML or JSON) whose keys use the
long option names with dashes or underscores; values in the file override
flags.  The default seed comes from ``AFFINE_IFS_SEED`` when set.

Exit codes: 0 success, 1 acceptance failure, 2 usage, 3 I/O,
4 numerical or convergence failure, 5 precondition or domain violation.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import experiments as ex
from . import random_walks as rw
from . import stationary_measures as sm
from .errors import DomainError, IFSError, PreconditionError, UsageError
from .ifs_core import DIVERGE, SYNC, ZERO, SymbolStream, iterate_orbit, make_system, transfer_density_check
from .io import Table, emit_report
from .multivalued import fiber_distribution, fiber_is_uniform, strip_interval
from .skew_products import G_map, gamma

SEED_ENV = "AFFINE_IFS_SEED"


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


SYSTEM = [("M", int, None), ("N", int, None), ("p0", float, None)]

# name -> list of (option, type, default)
COMMANDS = {
    "system-info": SYSTEM,
    "orbit": SYSTEM + [("n", int, 100), ("starts", _floats, [0.1, 0.9]), ("word", _ints, None)],
    "transfer-check": SYSTEM + [("grid", int, 10_000)],
    "gamma-check": SYSTEM + [("points", int, 100_000)],
    "fiber": SYSTEM[:2] + [("eta", _ints, [])],
    "strip": SYSTEM[:2] + [("word", _ints, [])],
    "walk": [("L", float, None), ("R", float, None), ("p0", float, None), ("z0", float, 0.0), ("n", int, 1000)],
    "stopping": [
        ("kind", str, None), ("L", float, None), ("R", float, None), ("p0", float, None),
        ("M", int, None), ("N", int, None), ("z0", float, 0.0), ("K", float, None),
        ("c", float, 1.0), ("eps", float, 0.009), ("xJ", float, None), ("zeta", _ints, None),
        ("trials", int, 1000), ("cap", int, rw.DEFAULT_CAP),
    ],
    "stationary": SYSTEM + [("H", int, None)],
    "roots": SYSTEM,
    "delta-mass": SYSTEM + [("eps", _floats, [3.0 ** -m for m in range(1, 7)])],
    "experiment": SYSTEM + [
        ("kind", str, None), ("trials", int, 20), ("n", int, 10 ** 6),
        ("eps", _floats, None), ("beta", float, 0.5), ("bins", int, 20), ("grid", int, 81),
    ],
    "verify-all": [("only", _ints, [])],
}
SEEDED = {"orbit", "gamma-check", "walk", "stopping", "experiment"}
EXPERIMENT_KINDS = ("sync", "intermit", "diverge", "equi", "hist2d")
STOPPING_KINDS = ("T", "TK", "S", "W", "V")


@dataclass
class RunConfig:
    command: str
    params: dict
    seed: int = 0
    output: Optional[str] = None
    format: str = "json"
    system: Optional[object] = field(default=None, repr=False)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="affine-ifs", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, opts in COMMANDS.items():
        sp = sub.add_parser(name)
        if name == "experiment":
            sp.add_argument("kind", choices=EXPERIMENT_KINDS)
        elif name == "stopping":
            sp.add_argument("kind", choices=STOPPING_KINDS)
        for opt, typ, default in opts:
            if opt == "kind":
                continue
            sp.add_argument(f"--{opt}", type=typ, default=None, dest=opt)
        if name in SEEDED:
            sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--config", default=None, help="TOML or JSON document overriding flags")
        sp.add_argument("--output", "-o", default=None, help="output path (default stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default=None)
    return p


def _load_document(text: str, syntax: Optional[str]) -> dict:
    try:
        if syntax == "json" or (syntax is None and text.lstrip().startswith("{")):
            doc = json.loads(text)
        else:
            doc = tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"malformed config document: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError("config document must be a table/object")
    return doc


def _coerce(typ, value, key):
    try:
        if typ in (_floats, _ints):
            items = value if isinstance(value, list) else str(value).split(",")
            conv = float if typ is _floats else int
            return [conv(v) for v in items]
        if typ is int and isinstance(value, float) and not value.is_integer():
            raise ValueError(value)
        return typ(value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad value for {key!r}: {value!r}") from exc


def _apply_document(command, values, doc, meta):
    allowed = {opt: typ for opt, typ, _ in COMMANDS[command]}
    for raw_key, value in doc.items():
        key = raw_key.replace("_", "-") if raw_key.replace("_", "-") in ("seed", "output", "format") else raw_key
        key = key.replace("-", "_") if key.replace("-", "_") in allowed else key
        if key in ("seed", "output", "format"):
            meta[key] = value
        elif key in allowed:
            values[key] = _coerce(allowed[key], value, raw_key)
        else:
            raise UsageError(f"unknown config key {raw_key!r} for command {command!r}")


def parse_config(argv: Optional[Sequence[str]] = None, text: Optional[str] = None,
                 syntax: Optional[str] = None) -> RunConfig:
    """Build a validated :class:`RunConfig` from flags or from a config document.

    Parameters
    ----------
    argv : sequence of str, optional
        Command line without the program name.
    text : str, optional
        A complete TOML or JSON document with a ``command`` key (and ``kind``
        for ``experiment`` and ``stopping``); used instead of ``argv``.
    """
    meta = {}
    if text is not None:
        doc = dict(_load_document(text, syntax))
        command = doc.pop("command", None)
        if command not in COMMANDS:
            raise UsageError(f"config document needs a valid 'command', got {command!r}")
        values = {}
        if command in ("experiment", "stopping"):
            values["kind"] = doc.pop("kind", None)
        _apply_document(command, values, doc, meta)
    else:
        ns = build_parser().parse_args(list(sys.argv[1:] if argv is None else argv))
        command = ns.command
        values = {opt: getattr(ns, opt) for opt, _, _ in COMMANDS[command] if getattr(ns, opt, None) is not None}
        for key in ("seed", "output", "format"):
            if getattr(ns, key, None) is not None:
                meta[key] = getattr(ns, key)
        if command in ("experiment", "stopping"):
            values["kind"] = ns.kind
        if ns.config:
            try:
                body = Path(ns.config).read_text(encoding="utf-8")
            except OSError as exc:
                raise UsageError(f"cannot read config {ns.config}: {exc}") from exc
            syntax = "json" if ns.config.endswith(".json") else ("toml" if ns.config.endswith(".toml") else None)
            _apply_document(command, values, _load_document(body, syntax), meta)
    params = {opt: values.get(opt, default) for opt, _, default in COMMANDS[command]}
    seed = meta.get("seed")
    if seed is None:
        env = os.environ.get(SEED_ENV)
        try:
            seed = int(env) if env else 0
        except ValueError as exc:
            raise UsageError(f"{SEED_ENV} must be an integer") from exc
    fmt = meta.get("format") or "json"
    if fmt not in ("json", "csv"):
        raise UsageError(f"format must be json or csv, got {fmt!r}")
    cfg = RunConfig(command, params, int(seed), meta.get("output"), fmt)
    _validate(cfg)
    return cfg


def _require(cfg, *names):
    missing = [n for n in names if cfg.params.get(n) is None]
    if missing:
        raise UsageError(f"{cfg.command} requires {', '.join('--' + m for m in missing)}")


def _validate(cfg: RunConfig) -> None:
    c, p = cfg.command, cfg.params
    if cfg.seed < 0:
        raise UsageError("seed must be non-negative")
    if c in ("system-info", "orbit", "transfer-check", "gamma-check", "stationary", "roots", "delta-mass", "experiment"):
        _require(cfg, "M", "N", "p0")
        cfg.system = make_system(p["M"], p["N"], p["p0"])
    elif c in ("fiber", "strip"):
        _require(cfg, "M", "N")
        cfg.system = make_system(p["M"], p["N"], 0.5)
    if c in ("stationary", "roots", "delta-mass"):
        if sm.mult_dependence(p["M"], p["N"]) is None:
            raise PreconditionError(f"(M, N) = ({p['M']}, {p['N']}) is not multiplicatively dependent")
    if c == "experiment":
        kind = p["kind"]
        if kind not in EXPERIMENT_KINDS:
            raise UsageError(f"experiment kind must be one of {EXPERIMENT_KINDS}")
        gate = {"sync": SYNC, "intermit": ZERO, "diverge": DIVERGE, "hist2d": DIVERGE}.get(kind)
        if gate is not None and cfg.system.regime != gate:
            raise PreconditionError(
                f"experiment {kind} is gated on the sign of the Lyapunov exponent; "
                f"lyap = {cfg.system.lyap:.6g} does not qualify")
    if c == "walk":
        _require(cfg, "L", "R", "p0")
    if c == "stopping":
        kind = p["kind"]
        if kind not in STOPPING_KINDS:
            raise UsageError(f"stopping kind must be one of {STOPPING_KINDS}")
        if kind in ("T", "TK"):
            _require(cfg, "L", "R", "p0")
        if kind == "TK":
            _require(cfg, "K")
        if kind == "S":
            _require(cfg, "p0")
        if kind in ("W", "V"):
            _require(cfg, "M", "N", "p0")
            cfg.system = make_system(p["M"], p["N"], p["p0"])
        if kind == "V":
            _require(cfg, "zeta")


def _stopping(cfg):
    p, kind, seed = cfg.params, cfg.params["kind"], cfg.seed
    trials, cap = p["trials"], p["cap"]
    if kind in ("T", "TK"):
        wp = rw.WalkParams(p["L"], p["R"], p["p0"])
        b = rw.first_passage_batch(wp, p["z0"], trials, seed, upperK=p["K"] if kind == "TK" else None, cap=cap)
        times, cens = b.times, b.censored
        meta = {"below0": int(np.count_nonzero(b.sides == rw.BELOW))}
        if wp.drift < 0:
            meta["wald_bound"] = rw.wald_bound(wp)
    elif kind == "S":
        wz = rw.WalkParams.zero_drift(p["p0"], p["c"])
        times, cens = rw.stop_S_timedep_batch(wz, rw.LevelSchedule.from_eps(p["eps"]), p["z0"], trials, seed, cap)
        meta = {}
    elif kind == "W":
        xJ = p["xJ"] if p["xJ"] is not None else 0.5 / cfg.system.N
        times, reasons = rw.stop_W_batch(cfg.system, p["eps"], xJ, trials, seed, cap)
        cens = reasons == rw.REASON_CENSORED
        meta = {"by_derivative": int(np.count_nonzero(reasons == rw.REASON_DERIVATIVE)),
                "by_neighborhood": int(np.count_nonzero(reasons == rw.REASON_NEIGHBORHOOD))}
    else:
        times, cens = rw.stop_V_batch(cfg.system, p["zeta"], trials, seed, cap)
        meta = {}
    meta.update({"kind": kind, "trials": trials, "cap": cap, "seed": seed,
                 "mean_truncated": float(times.mean()), "censored": int(np.count_nonzero(cens))})
    return Table({"trial": np.arange(trials), "time": times, "censored": cens}, meta)


def dispatch(cfg: RunConfig):
    """Run the configured command and return its report object."""
    c, p, sys_ = cfg.command, cfg.params, cfg.system
    if c == "system-info":
        md = sm.mult_dependence(sys_.M, sys_.N)
        return {"M": sys_.M, "N": sys_.N, "p0": sys_.p0, "probs": list(sys_.probs),
                "breakpoints": list(sys_.breakpoints), "lyap": sys_.lyap, "regime": sys_.regime,
                "mult_dependence": None if md is None else {"kappa": md.kappa, "k": md.k, "l": md.l}}
    if c == "orbit":
        omega = p["word"] if p["word"] is not None else SymbolStream(sys_, cfg.seed)
        n = None if p["word"] is not None else p["n"]
        recs = iterate_orbit(sys_, omega, p["starts"], n)
        cols = {"t": np.arange(recs[0].points.size)}
        for j, r in enumerate(recs):
            cols[f"x{j}"] = r.points
        cols["logDeriv"] = recs[0].logDeriv
        cols["crossing"] = np.concatenate(([False], recs[0].crossings))
        return Table(cols, {"seed": cfg.seed})
    if c == "transfer-check":
        xs = np.arange(p["grid"]) / p["grid"]
        return {"grid": p["grid"], "max_deviation": transfer_density_check(sys_, xs)}
    if c == "gamma-check":
        rng = np.random.default_rng(cfg.seed)
        pts = rng.random((p["points"], 3))
        fwd = gamma(sys_, pts, "forward")
        back = gamma(sys_, fwd, "inverse")
        gw, gx = G_map(sys_, pts[:, 0], pts[:, 1])
        return {"points": p["points"], "round_trip": float(np.max(np.abs(back - pts))),
                "factor": float(max(np.max(np.abs(fwd[:, 0] - gw)), np.max(np.abs(fwd[:, 1] - gx))))}
    if c == "fiber":
        dist = fiber_distribution(sys_, p["eta"])
        pts = sorted(dist)
        return Table({"numerator": [g.numerator for g in pts], "level": [g.level for g in pts],
                      "count": [dist[g] for g in pts]}, {"uniform": fiber_is_uniform(dist)})
    if c == "strip":
        s = strip_interval(sys_, p["word"])
        lo, hi = s.bounds
        return {"kappa": s.kappa, "index": s.index, "level": s.level, "lower": float(lo), "upper": float(hi)}
    if c == "walk":
        wp = rw.WalkParams(p["L"], p["R"], p["p0"])
        z = rw.simulate_walk(wp, p["z0"], p["n"], cfg.seed)
        return Table({"n": np.arange(z.size), "z": z}, {"drift": wp.drift, "seed": cfg.seed})
    if c == "stopping":
        return _stopping(cfg)
    md = sm.mult_dependence(sys_.M, sys_.N) if sys_ is not None else None
    if c == "stationary":
        return sm.solve_b(sys_.p0, md.k, md.l, p["H"])
    if c == "roots":
        return sm.char_roots(sys_.p0, md.k, md.l)
    if c == "delta-mass":
        cs = sm.solve_b(sys_.p0, md.k, md.l)
        eps = np.asarray(p["eps"])
        return Table({"eps": eps, "mass": [sm.delta_eps_mass(cs, md.kappa, e) for e in eps]},
                     {"kappa": md.kappa, "exponent": -math.log(cs.ratio) / math.log(md.kappa)})
    if c == "experiment":
        kind, seed = p["kind"], cfg.seed
        if kind == "sync":
            return ex.sync_experiment(sys_, p["trials"], p["n"], seed)
        if kind == "intermit":
            eps = (p["eps"] or [0.1])[0]
            return ex.intermittency_experiment(sys_, eps, p["beta"], p["n"], seed, trials=p["trials"])
        if kind == "diverge":
            eps = p["eps"] or [3.0 ** -m for m in range(1, 7)]
            return ex.divergence_experiment(sys_, eps, p["n"], p["trials"], seed)
        if kind == "equi":
            return ex.equidistribution_test(sys_, p["bins"], p["n"], seed)
        return ex.two_point_histogram(sys_, p["grid"], p["n"], seed)
    raise UsageError(f"unknown command {c!r}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = parse_config(argv)
        if cfg.command == "verify-all":
            from .acceptance import run_all
            results = run_all(only=set(cfg.params["only"] or []), out=lambda s: print(s, flush=True))
            return 0 if all(r.passed for r in results) else 1
        emit_report(dispatch(cfg), cfg.output, cfg.format)
        return 0
    except IFSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
