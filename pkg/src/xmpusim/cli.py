"""Command line entry point: run, verify and report on scenario scripts."""

from __future__ import annotations

import argparse
import sys

from .errors import MissingGolden
from .scenario import RunOptions, report_text, run_scenario
from .transcript import compare_transcript


def _add_common(parser):
    parser.add_argument("script", help="scenario script path")
    parser.add_argument("--seed", type=lambda s: int(s, 0), default=None,
                        help="initial PID counter value")
    parser.add_argument("--policy", choices=["none", "terminate", "reassign"],
                        default=None, help="override the script's sanitize policy")
    parser.add_argument("--fill", type=lambda s: int(s, 0), default=0,
                        help="sanitize fill word (with --policy)")
    parser.add_argument("--cost", type=lambda s: int(s, 0), default=1,
                        help="sanitize cost per word in cycles (with --policy)")


def _options(args) -> RunOptions:
    return RunOptions(pid_seed=args.seed, policy=args.policy,
                      fill=args.fill, cost_per_word=args.cost)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="xmpusim",
        description="Deterministic scenario replay for the memory-protection "
                    "residue simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario and print its transcript")
    _add_common(p_run)
    p_run.add_argument("--quiet", action="store_true", help="suppress the transcript")

    p_verify = sub.add_parser("verify", help="execute and compare against a golden transcript")
    _add_common(p_verify)
    p_verify.add_argument("--golden", required=True, help="golden transcript path")

    p_report = sub.add_parser("report", help="execute and print the structured report")
    _add_common(p_report)
    p_report.add_argument("--format", choices=["text", "structured"], default="text")

    args = parser.parse_args(argv)
    result = run_scenario(args.script, _options(args))

    if args.command == "run":
        if not args.quiet and result.transcript:
            sys.stdout.write(result.transcript)
        if result.error:
            print(f"error: {result.error}", file=sys.stderr)
        return result.exit_code

    if args.command == "verify":
        if result.error:
            print(f"error: {result.error}", file=sys.stderr)
            return result.exit_code
        try:
            diff = compare_transcript(result.transcript, args.golden)
        except MissingGolden as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        if diff is None:
            print("OK")
            return 0
        print(diff)
        return 1

    if result.error:
        print(f"error: {result.error}", file=sys.stderr)
        return result.exit_code
    sys.stdout.write(report_text(result.report, args.format))
    return 0


if __name__ == "__main__":
    sys.exit(main())
