"""Command-line experiment runner.

Verbs: `run` (one experiment), `sweep --seeds a..b` (repeated runs with
aggregated summary), `check` (validate and print the resolved config).
Any config key can be overridden as `--key value`. Exit codes: 0 on
success, 1 on configuration errors, 2 on runtime errors.

The environment variable SNOWBALL_SIM_THREADS caps sweep worker
parallelism (0 or unset = auto).
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .config import config_to_dict, parse_config
from .engine import ExperimentConfig, run_experiment
from .errors import ConfigError
from .outputs import write_outputs


def _parse_args(argv: list[str]):
    parser = argparse.ArgumentParser(
        prog="snowball-sim",
        description="Deterministic federated-learning simulator with backdoor attacks "
                    "and election-based defenses.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "run one experiment"),
                            ("sweep", "run a range of seeds and aggregate"),
                            ("check", "validate a configuration and exit")):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", default=None, help="path to a key = value config file")
        sp.add_argument("--out", default="out", help="output directory")
        if name == "sweep":
            sp.add_argument("--seeds", default="0..4", help="inclusive seed range a..b")
    ns, rest = parser.parse_known_args(argv)
    overrides: dict[str, str] = {}
    it = iter(rest)
    for token in it:
        if not token.startswith("--"):
            raise ConfigError(f"unexpected argument {token!r}")
        value = next(it, None)
        if value is None:
            raise ConfigError(f"missing value for override {token}")
        overrides[token[2:]] = value
    return ns, overrides


def _parse_seed_range(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo), int(hi)
        else:
            lo = hi = int(text)
    except ValueError:
        raise ConfigError(f"--seeds expects 'a..b', got {text!r}") from None
    if hi < lo:
        raise ConfigError(f"--seeds range is empty: {text!r}")
    return list(range(lo, hi + 1))


def _sweep_worker(cfg: ExperimentConfig, out_dir: str) -> dict:
    result = run_experiment(cfg)
    write_outputs(result, out_dir)
    return {"seed": cfg.seed, "ma": result.summary["ma"], "ba": result.summary["ba"],
            "best_round": result.summary["best_round"]}


def _worker_count(n_jobs: int) -> int:
    cap = int(os.environ.get("SNOWBALL_SIM_THREADS", "0") or "0")
    if cap <= 0:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_jobs))


def cmd_run(ns, overrides) -> int:
    cfg = parse_config(ns.config, overrides)
    result = run_experiment(cfg)
    paths = write_outputs(result, ns.out)
    print(f"ma={result.summary['ma']:.4f} ba={result.summary['ba']:.4f} "
          f"best_round={result.summary['best_round']} -> {paths['summary']}")
    return 0


def cmd_sweep(ns, overrides) -> int:
    base = parse_config(ns.config, overrides)
    seeds = _parse_seed_range(ns.seeds)
    jobs = [(replace(base, seed=s), str(Path(ns.out) / f"seed_{s}")) for s in seeds]
    workers = _worker_count(len(jobs))
    if workers == 1:
        results = [_sweep_worker(cfg, out) for cfg, out in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_worker, *zip(*jobs)))
    results.sort(key=lambda r: r["seed"])
    mas = [r["ma"] for r in results]
    bas = [r["ba"] for r in results]
    summary = {
        "seeds": seeds,
        "ma": {"mean": statistics.fmean(mas),
               "std": statistics.pstdev(mas) if len(mas) > 1 else 0.0},
        "ba": {"mean": statistics.fmean(bas),
               "std": statistics.pstdev(bas) if len(bas) > 1 else 0.0},
        "per_seed": results,
        "config": config_to_dict(base),
    }
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"seeds {seeds[0]}..{seeds[-1]}: ma={summary['ma']['mean']:.4f}"
          f"+-{summary['ma']['std']:.4f} ba={summary['ba']['mean']:.4f}"
          f"+-{summary['ba']['std']:.4f}")
    return 0


def cmd_check(ns, overrides) -> int:
    cfg = parse_config(ns.config, overrides)
    for key, value in config_to_dict(cfg).items():
        print(f"{key} = {value}")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        ns, overrides = _parse_args(argv)
        if ns.command == "run":
            return cmd_run(ns, overrides)
        if ns.command == "sweep":
            return cmd_sweep(ns, overrides)
        return cmd_check(ns, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
