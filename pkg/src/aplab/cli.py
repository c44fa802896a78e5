"""Command-line entry point: simulation sweeps, threshold estimation, and
exact martingale verification.

Exit codes are stable: 0 success, 2 usage/config error, 3 malformed data,
4 failed verification check.  Output lives under
<out>/<property>/<strategy>/<n>/ so downstream tooling can glob for files
without parsing manifests.  Reruns with the same configuration and seed
produce byte-identical files; the worker count only schedules work and never
appears in outputs, so it cannot perturb bytes either.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import __version__
from .errors import CheckFailure, DataError, UsageError

_CONFIG_KEYS = {
    "property",
    "strategy",
    "n",
    "trials",
    "theta",
    "seed",
    "out",
    "max_steps",
    "workers",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aplab",
        description="Simulator and verification lab for adaptive random graph processes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_theta: bool):
        p.add_argument("--property", dest="property_id", help="target property id")
        p.add_argument("--strategy", dest="strategy_id", help="strategy id")
        p.add_argument("--n", dest="n", action="append", type=int, help="vertex count (repeatable)")
        p.add_argument("--trials", type=int, help="independent trials per n (default 100)")
        if with_theta:
            p.add_argument(
                "--theta",
                action="append",
                help="quantile level as p/q or decimal numerator/denominator string (repeatable)",
            )
        p.add_argument("--seed", type=int, help="seed base (default 0)")
        p.add_argument("--out", help="output directory (default aplab-out)")
        p.add_argument("--max-steps", dest="max_steps", type=int, help="horizon override (default 10n)")
        p.add_argument("--workers", type=int, help="worker processes (default $APLAB_WORKERS or 1)")
        p.add_argument("--config", help="JSON config file; explicit flags override its values")

    sim = sub.add_parser("simulate", help="run trials and write per-trial stopping times")
    add_common(sim, with_theta=False)

    thr = sub.add_parser("threshold", help="estimate hitting-time quantiles over an n x theta grid")
    add_common(thr, with_theta=True)

    ver = sub.add_parser("verify-martingale", help="run the exact verification suite on instance files")
    ver.add_argument(
        "instances",
        nargs="*",
        help="instance JSON paths or bundled names (default: all bundled instances)",
    )
    ver.add_argument("--out", help="write the JSON report to this file as well as stdout")
    return parser


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise UsageError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise DataError(f"config file {path} must hold a JSON object")
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return cfg


def _as_list(value):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def _resolve(args, with_theta: bool) -> dict:
    cfg = _load_config_file(args.config) if args.config else {}

    def pick(flag_value, key, default=None):
        if flag_value is not None:
            return flag_value
        if key in cfg:
            return cfg[key]
        return default

    resolved = {
        "property": pick(args.property_id, "property"),
        "strategy": pick(args.strategy_id, "strategy"),
        "n": _as_list(pick(args.n, "n")),
        "trials": pick(args.trials, "trials", 100),
        "seed": pick(args.seed, "seed", 0),
        "out": pick(args.out, "out", "aplab-out"),
        "max_steps": pick(args.max_steps, "max_steps"),
        "workers": pick(args.workers, "workers"),
    }
    if with_theta:
        raw = pick(args.theta, "theta")
        thetas = []
        for item in _as_list(raw) or []:
            theta = Fraction(item) if not isinstance(item, str) else _parse_theta(item)
            if not 0 < theta < 1:
                raise UsageError(f"theta must lie strictly between 0 and 1, got {theta}")
            thetas.append(theta)
        if not thetas:
            raise UsageError("threshold needs at least one --theta")
        resolved["theta"] = thetas
    if not resolved["property"]:
        raise UsageError("missing --property")
    if not resolved["strategy"]:
        raise UsageError("missing --strategy")
    if not resolved["n"]:
        raise UsageError("missing --n")
    if any(int(v) < 2 for v in resolved["n"]):
        raise UsageError("every n must be >= 2")
    if int(resolved["trials"]) < 1:
        raise UsageError("trials must be >= 1")
    return resolved


def _parse_theta(text: str) -> Fraction:
    from .martingale import parse_rational

    text = text.strip()
    try:
        if "/" in text:
            return parse_rational(text)
        return Fraction(text)  # accepts decimals like 0.9 exactly
    except (ValueError, DataError) as exc:
        raise UsageError(f"bad theta value {text!r}") from exc


def _run_dir(out: str, property_id: str, strategy_id: str, n: int) -> str:
    path = os.path.join(out, property_id, strategy_id, str(n))
    os.makedirs(path, exist_ok=True)
    return path


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _manifest(command: str, pool, extra: dict) -> str:
    from .thresholds import config_hash

    doc = {
        "command": command,
        "config": pool.config(),
        "config_sha256": config_hash(pool.config()),
        "version": __version__,
    }
    doc.update(extra)
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def cmd_simulate(args) -> int:
    from .properties import parse_property_id
    from .strategies import parse_strategy_id
    from .thresholds import format_trials_csv, run_pool

    conf = _resolve(args, with_theta=False)
    parse_property_id(conf["property"])  # validate ids before any work
    parse_strategy_id(conf["strategy"])
    for n in conf["n"]:
        pool = run_pool(
            conf["strategy"],
            conf["property"],
            int(n),
            int(conf["trials"]),
            int(conf["seed"]),
            max_steps=conf["max_steps"],
            workers=conf["workers"],
        )
        run_dir = _run_dir(conf["out"], conf["property"], conf["strategy"], int(n))
        _write(os.path.join(run_dir, "trials.csv"), format_trials_csv(pool))
        _write(
            os.path.join(run_dir, "manifest.json"),
            _manifest("simulate", pool, {"censored": pool.censored()}),
        )
        print(f"{run_dir}/trials.csv: {pool.trials} trials, {pool.censored()} censored")
    return 0


def cmd_threshold(args) -> int:
    from .properties import parse_property_id
    from .strategies import parse_strategy_id
    from .thresholds import (
        estimate_m_theta,
        format_summary_csv,
        format_trials_csv,
        run_pool,
    )

    conf = _resolve(args, with_theta=True)
    parse_property_id(conf["property"])
    parse_strategy_id(conf["strategy"])
    for n in conf["n"]:
        pool = run_pool(
            conf["strategy"],
            conf["property"],
            int(n),
            int(conf["trials"]),
            int(conf["seed"]),
            max_steps=conf["max_steps"],
            workers=conf["workers"],
        )
        estimates = [estimate_m_theta(pool, theta) for theta in conf["theta"]]
        run_dir = _run_dir(conf["out"], conf["property"], conf["strategy"], int(n))
        _write(os.path.join(run_dir, "trials.csv"), format_trials_csv(pool))
        _write(os.path.join(run_dir, "summary.csv"), format_summary_csv(pool, estimates))
        _write(
            os.path.join(run_dir, "manifest.json"),
            _manifest(
                "threshold",
                pool,
                {"theta": [f"{t.numerator}/{t.denominator}" for t in conf["theta"]]},
            ),
        )
        for est in estimates:
            print(
                f"n={n} theta={est.theta}: t_hat={est.t_hat} "
                f"ci=[{est.ci[0]}, {est.ci[1]}] ({est.trials_used} trials)"
            )
    return 0


def _verify_one(source: str) -> dict:
    from . import martingale as mart

    if os.path.sep in source or source.endswith(".json") or os.path.exists(source):
        path = source
        name = os.path.splitext(os.path.basename(source))[0]
    else:
        path = mart.bundled_instance_path(source)
        name = source
    inst = mart.load_instance(path)
    if inst["kind"] == "doob":
        doob = mart.exact_doob(inst["dist"], inst["strategy"], inst["prop"], inst["N"])
        doob.check_tower()
        params = mart.make_boost_params(inst["theta"], doob.mu, inst["m_star"])
        potential = mart.find_potential(doob, params)
        run = mart.potential_boost_run(doob, params)
        arming = mart.verify_quantify_boost(doob, params)
        return {
            "instance": name,
            "kind": "doob",
            "N": inst["N"],
            "m_star": inst["m_star"],
            "m_star_supplied": inst["m_star_supplied"],
            "mu": doob.mu,
            "c_theta": params.c_theta,
            "c2": params.c2,
            "tower_ok": True,
            "unstable_mass": potential.unstable_mass,
            "stable_set_mass": potential.stable_set_mass,
            "boost": run,
            "arming_bound": arming,
        }
    M = inst["martingale"]
    balanced = mart.is_balanced(M)
    result = mart.couple_balanced(M)
    _, stable_mass = mart.stable_sequences(M)
    report = {
        "instance": name,
        "kind": "martingale",
        "levels": M.k,
        "balanced": balanced,
        "stable_mass": stable_mass,
        "coupling_records": result.records,
        "coupled_values": {
            ",".join(map(str, k)): v for k, v in sorted(result.coupled.values.items())
        },
    }
    return report


def cmd_verify_martingale(args) -> int:
    from .martingale import report_to_jsonable

    sources = args.instances or ["two_subset", "coupling_k1"]
    reports = [_verify_one(source) for source in sources]
    doc = json.dumps(
        {"all_passed": True, "instances": report_to_jsonable(reports)},
        sort_keys=True,
        indent=2,
    )
    if args.out:
        _write(args.out, doc + "\n")
    print(doc)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "threshold":
            return cmd_threshold(args)
        if args.command == "verify-martingale":
            return cmd_verify_martingale(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
