"""Command-line front end.

Subcommands: ``price``, ``table``, ``converge``, ``smile``, ``validate``.
Configuration comes from a sectioned key-value file (INI syntax) or a JSON
document with the same section names; see README for the schema.  Exit codes:
0 ok, 1 invariant failure, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import benchmarks, reference, validation
from .errors import ArbError, CurveError, ParamError, SvJumpError
from .hybrid import NumericalConfig, price as hybrid_price
from .model import MarketModel, OptionContract
from .montecarlo import McConfig, price_american_ls, price_european_mc

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

_MODEL_FIELDS = ("s0", "y0", "dividend", "kappa_y", "theta_y", "sigma_y", "r0",
                 "kappa_r", "sigma_r", "rho1", "rho2", "lam", "gamma_j", "eta_j")


def load_config(path: str) -> dict:
    """Read an INI-style or JSON config into a dict of section dicts."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return json.loads(text)
    import configparser

    parser = configparser.ConfigParser()
    parser.read_string(text)
    return {sec: dict(parser.items(sec)) for sec in parser.sections()}


def _get(section: dict, key: str, cast, default=None, required=False):
    if key not in section:
        if required:
            raise ParamError(f"missing config key {key!r}")
        return default
    try:
        value = section[key]
        if cast is bool and isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return cast(value)
    except (TypeError, ValueError) as exc:
        raise ParamError(f"bad value for {key!r}: {section[key]!r}") from exc


def build_model(cfg: dict) -> MarketModel:
    sec = cfg.get("model", {})
    kwargs = {}
    for name in _MODEL_FIELDS:
        val = _get(sec, name, float, required=(name in ("s0", "y0")))
        if val is not None:
            kwargs[name] = val
    return MarketModel(**kwargs).validated()


def build_contract(cfg: dict) -> OptionContract:
    sec = cfg.get("contract", {})
    return OptionContract(
        strike=_get(sec, "strike", float, required=True),
        maturity=_get(sec, "maturity", float, required=True),
        kind=_get(sec, "kind", str, "call"),
        style=_get(sec, "style", str, "european"),
    )


def build_numerics(cfg: dict) -> NumericalConfig:
    sec = cfg.get("numerics", {})
    kwargs = dict(
        n_steps=_get(sec, "n_steps", int, 100),
        dx=_get(sec, "dx", float, 0.0025),
        scheme=_get(sec, "scheme", str, "central"),
        levy_tol=_get(sec, "levy_tol", float, 1e-7),
        interp_order=_get(sec, "interp_order", int, 3),
    )
    thr = _get(sec, "discount_threshold", float)
    if thr is not None:
        kwargs["discount_threshold"] = thr
    w_minus = _get(sec, "width_minus", float)
    w_plus = _get(sec, "width_plus", float)
    if w_minus is not None and w_plus is not None:
        kwargs["space_width"] = (w_minus, w_plus)
    return NumericalConfig(**kwargs)


def build_mc(cfg: dict, seed_override=None) -> McConfig:
    sec = cfg.get("mc", {})
    seed = seed_override if seed_override is not None else _get(sec, "seed", int, 0)
    return McConfig(
        n_paths=_get(sec, "n_paths", int, 50_000),
        n_steps=_get(sec, "n_steps", int, 100),
        n_exercise_dates=_get(sec, "n_exercise_dates", int, 20),
        seed=seed,
        basis_degree=_get(sec, "basis_degree", int, 2),
    )


def _fmt(value: float, raw: bool) -> str:
    if isinstance(value, float):
        return repr(value) if raw else f"{value:.6g}"
    return str(value)


def _emit(lines, out_path):
    text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text, newline="\n")
    else:
        sys.stdout.write(text)


# -- subcommands -------------------------------------------------------------


def cmd_price(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg)
    contract = build_contract(cfg)
    t0 = time.perf_counter()
    ci = None
    if args.method == "htfd":
        result = hybrid_price(model, contract, build_numerics(cfg))
        value = result.price
    elif args.method == "mc":
        mc = build_mc(cfg, args.seed)
        est = (price_american_ls(model, contract, mc) if contract.is_american
               else price_european_mc(model, contract, mc))
        value, ci = est.mean, est.half_width
    else:  # cf
        if contract.is_american:
            raise ParamError("method=cf prices European contracts only")
        value = reference.carr_madan_price(model, contract.strike, contract.maturity,
                                           contract.kind)
    report = {
        "method": args.method,
        "price": value,
        "ci": ci,
        "runtime_ms": 1000.0 * (time.perf_counter() - t0),
        "config": args.config,
        "contract": {"strike": contract.strike, "maturity": contract.maturity,
                     "kind": contract.kind, "style": contract.style},
    }
    _emit([json.dumps(report)], args.out)
    return EXIT_OK


def _table_rows(args, cfg):
    sec = cfg.get("table", {})
    table_id = args.table if args.table else _get(sec, "id", str, required=True)
    style, variants, factory, refs = benchmarks.table_spec(table_id)
    dx_grid = [float(s) for s in _get(sec, "dx_grid", str, "0.0025").split(",")]
    spots = [float(s) for s in _get(sec, "spots", str, ",".join(str(s) for s in benchmarks.SPOTS)).split(",")]
    n_steps = _get(sec, "n_steps", int, 100)
    maturity = 5.0 if table_id == "t4" else 0.5
    jobs = []
    for key, variant in variants:
        for s0 in spots:
            model = factory(s0) if key is None else factory(s0, variant)
            contract = OptionContract(benchmarks.STRIKE, maturity, "call", style)
            ref_key = s0 if key is None else (variant, s0)
            ref = refs[ref_key][0]
            for dx in dx_grid:
                jobs.append((variant, s0, dx, model, contract, ref, n_steps))
    return table_id, jobs


def cmd_table(args) -> int:
    cfg = load_config(args.config)
    table_id, jobs = _table_rows(args, cfg)
    header = "variant,S0,dx,price,reference,abs_err"
    if args.dry_run:
        _emit([header], args.out)
        return EXIT_OK

    def run(job):
        variant, s0, dx, model, contract, ref, n_steps = job
        num = NumericalConfig(n_steps=n_steps, dx=dx)
        p = hybrid_price(model, contract, num).price
        return variant, s0, dx, p, ref, abs(p - ref)

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        results = list(pool.map(run, jobs))
    lines = [header]
    for variant, s0, dx, p, ref, err in results:
        lines.append(",".join([
            _fmt(float(variant) if variant is not None else 0.0, args.raw),
            _fmt(float(s0), args.raw), _fmt(float(dx), args.raw),
            _fmt(p, args.raw), _fmt(ref, args.raw), _fmt(err, args.raw)]))
    _emit(lines, args.out)
    return EXIT_OK


def cmd_converge(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg)
    contract = build_contract(cfg)
    sec = cfg.get("converge", {})
    steps = [int(s) for s in _get(sec, "steps", str, "50,100,200,400,800").split(",")]
    for a, b in zip(steps, steps[1:]):
        if b != 2 * a:
            raise ParamError(f"steps must double: got {a} then {b}")
    base = build_numerics(cfg)
    prices = {}

    def run(n):
        num = NumericalConfig(**{**base.__dict__, "n_steps": n})
        return n, hybrid_price(model, contract, num).price

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        for n, p in pool.map(run, steps):
            prices[n] = p
    lines = ["N,price,ratio"]
    for n in steps:
        ratio = ""
        if n // 2 in prices and n // 4 in prices:
            ratio = _fmt(reference.convergence_ratio(prices[n], prices[n // 2], prices[n // 4]),
                         args.raw)
        lines.append(f"{n},{_fmt(prices[n], args.raw)},{ratio}")
    _emit(lines, args.out)
    return EXIT_OK


def cmd_smile(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg)
    contract = build_contract(cfg)
    sec = cfg.get("smile", {})
    axis = _get(sec, "axis", str, "moneyness")
    lo = _get(sec, "lo", float, 0.8 if axis == "moneyness" else 0.1)
    hi = _get(sec, "hi", float, 1.2 if axis == "moneyness" else 2.0)
    count = _get(sec, "count", int, 9)
    methods = _get(sec, "methods", str, "htfd,mc,cf").split(",")
    if count < 1:
        raise ParamError("smile needs count >= 1")
    grid = np.linspace(lo, hi, count)
    num = build_numerics(cfg)
    mc = build_mc(cfg, args.seed)

    def iv_of(p, strike, maturity):
        return reference.implied_vol(p, model.s0, strike, maturity, model.r0,
                                     model.dividend, contract.kind)

    lines = [axis + "," + ",".join(f"iv_{m}" for m in methods)]
    for g in grid:
        strike = g * model.s0 if axis == "moneyness" else contract.strike
        maturity = contract.maturity if axis == "moneyness" else float(g)
        this = OptionContract(strike, maturity, contract.kind, "european")
        cells = []
        for m in methods:
            if m == "htfd":
                p = hybrid_price(model, this, num).price
            elif m == "mc":
                p = price_european_mc(model, this, mc).mean
            elif m == "cf":
                p = reference.carr_madan_price(model, strike, maturity, contract.kind)
            else:
                raise ParamError(f"unknown smile method {m!r}")
            try:
                cells.append(_fmt(iv_of(p, strike, maturity), args.raw))
            except ArbError:
                cells.append("nan")
        lines.append(_fmt(float(g), args.raw) + "," + ",".join(cells))
    _emit(lines, args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    model = None
    if "model" in cfg:
        try:
            model = build_model(cfg)
        except ParamError as exc:
            _emit([f"[FAIL] model.parameter_invariants: {exc}", "0/1 checks passed"], args.out)
            return EXIT_INVARIANT
    groups = [args.only] if args.only else None
    checks = validation.run_validation(groups, model)
    lines = [c.line() for c in checks]
    n_fail = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    _emit(lines, args.out)
    return EXIT_OK if n_fail == 0 else EXIT_INVARIANT


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svjump", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="INI or JSON config file")
        p.add_argument("--seed", type=int, default=None, help="Monte Carlo seed override")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
        p.add_argument("--out", default=None, help="output file (default stdout)")
        p.add_argument("--raw", action="store_true", help="full float precision in output")

    p = sub.add_parser("price", help="price one contract")
    common(p)
    p.add_argument("--method", choices=("htfd", "mc", "cf"), default="htfd")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("table", help="benchmark sweep against stored references")
    common(p)
    p.add_argument("--table", choices=benchmarks.TABLE_IDS, default=None)
    p.add_argument("--dry-run", action="store_true", help="emit the CSV header only")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("converge", help="price over a doubling step sequence")
    common(p)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("smile", help="implied-volatility profile per method")
    common(p)
    p.set_defaults(func=cmd_smile)

    p = sub.add_parser("validate", help="run the invariant suites")
    common(p, config_required=False)
    p.add_argument("--only", choices=validation.GROUPS, default=None)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParamError, CurveError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SvJumpError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
