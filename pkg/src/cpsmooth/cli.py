"""Command line entry point ``cpsmooth``.

Exit codes: 0 when every hard assertion passed, 1 on an assertion failure,
2 on an input error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .errors import CPSmoothError, InputError, ResourceError

EXIT_OK, EXIT_ASSERT, EXIT_INPUT = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpsmooth", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--seed", type=int, help="seed (overrides the config)")
    r.add_argument("--force", action="store_true", help="ignore the atom-count guard")

    v = sub.add_parser("validate", help="run a randomized validator suite")
    v.add_argument("--suite", choices=["lemmas"], required=True)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--instances", type=int, default=100)
    v.add_argument("--out", help="optional output directory")

    s = sub.add_parser("shapes", help="evaluate bound shapes only (no exact laws)")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="optional output directory")
    return p


def _print_summary(report: harness.RunReport) -> None:
    summ = report.summary
    print(f"scenario: {summ['scenario']}")
    for name, counts in sorted(summ.get("pass_counts", {}).items()):
        print(f"  {name}: {counts['passed']}/{counts['total']} pass")
    for v, entry in summ.get("variants", {}).items():
        parts = [f"{k}={entry[k]:.4g}" for k in ("slope_distance", "slope_shape", "min_ratio", "max_ratio")
                 if entry.get(k) is not None]
        print(f"  {v}: " + ", ".join(parts))
    for err in summ.get("errors", []):
        print(f"  error: {err}")
    hard = summ["hard_assertions"]
    print("hard assertions: " + ("PASS" if hard["passed"] else f"FAIL ({len(hard['violations'])} violations)"))


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            config = harness.ExperimentConfig(
                scenario="lemma-suite", seed=args.seed, instances=args.instances
            )
            report = harness.run(config)
            out = args.out
        else:
            config = harness.load_config(args.config)
            if getattr(args, "seed", None) is not None:
                config.seed = args.seed
            if args.command == "run":
                report = harness.run(config, force=args.force)
                out = args.out or config.output
            else:
                report = harness.run(config, with_exact=False)
                out = args.out
    except (InputError, ResourceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CPSmoothError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if out:
        path = harness.write_results(report, out)
        print(f"wrote {path / 'results.csv'}")
    _print_summary(report)
    return EXIT_OK if report.hard_ok else EXIT_ASSERT


if __name__ == "__main__":
    sys.exit(main())
