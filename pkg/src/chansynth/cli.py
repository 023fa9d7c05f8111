"""chansynth command line: ``exactness``, ``rate-sweep`` and ``entropy-check``.

Exit status is 0 when the check passes, 1 when it fails and 2 on errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import bench
from .errors import ChansynthError

log = logging.getLogger("chansynth")


def _ns(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            lo, hi = (int(v) for v in part.split(":"))
            out.extend(range(lo, hi + 1))
        elif part:
            out.append(int(part))
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError(f"bad n list {text!r}")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--channel", required=True, help="channel spec (JSON)")
    common.add_argument("--n", type=_ns, required=True, dest="ns",
                        help="block lengths, e.g. 1,2 or 8,16,32,64 or 4:10")
    common.add_argument("--delta", default="1/2", help="quantizer step (default 1/2)")
    common.add_argument("--trials", type=int, default=10_000)
    common.add_argument("--seed", type=lambda s: int(s, 0), default=0)
    common.add_argument("--scheme", choices=("two-stage", "baseline", "both"),
                        default="two-stage")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--significance", type=float, default=1e-3)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="chansynth", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)
    ex = sub.add_parser("exactness", parents=[common],
                        help="chi-square test of end-to-end output against the exact joint law")
    ex.add_argument("--corrupt-index", type=int, default=0, metavar="K",
                    help="negative control: decoder reads index J+K")
    rs = sub.add_parser("rate-sweep", parents=[common], help="measured rate versus exact bounds")
    rs.add_argument("--scan-ceiling", type=float, default=256.0,
                    help="largest primary ceiling searched by scanning the codebook")
    sub.add_parser("entropy-check", parents=[common], help="exact side-information entropies")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = bench.ExperimentConfig(
            channel=args.channel, ns=args.ns, delta=args.delta, trials=args.trials,
            seed=args.seed, scheme=args.scheme, out=args.out, significance=args.significance,
            workers=args.workers, scan_ceiling=getattr(args, "scan_ceiling", 256.0))
        if args.verb == "exactness":
            report = bench.run_exactness(cfg, index_offset=args.corrupt_index)
        elif args.verb == "rate-sweep":
            report = bench.run_rate_sweep(cfg)
        else:
            report = bench.run_entropy_check(cfg)
        if args.out:
            bench.emit(report, args.out, args.format)
            log.info("wrote %s", args.out)
        else:
            sys.stdout.write(bench.report_text(report, args.format))
    except (ChansynthError, ValueError, OSError) as exc:
        print(f"chansynth: error: {exc}", file=sys.stderr)
        return 2
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{args.verb}: {verdict}", file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
