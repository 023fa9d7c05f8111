"""End-to-end exactness for the five reference channels at n = 1, 2.

Writes results/exactness.csv (and the negative control alongside).
"""
import argparse
import sys
import time
from pathlib import Path

from chansynth.bench import ExperimentConfig, emit, report_text, run_exactness

ROOT = Path(__file__).resolve().parents[1]
CHANNELS = ["bsc011", "bsc03", "bsc05", "bec05", "identity2"]


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=10 ** 6)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--out", default=str(ROOT / "results"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(exist_ok=True)
    ok = True
    lines = []
    t0 = time.time()
    for name in CHANNELS:
        cfg = ExperimentConfig(ROOT / "channels" / f"{name}.json", [1, 2], trials=args.trials,
                               seed=args.seed, scheme="both")
        rep = run_exactness(cfg)
        ok &= rep.passed
        text = report_text(rep).splitlines()
        lines += [f"{name},{row}" for row in text[1:]]
        header = "channel," + text[0]
        print(name, "PASS" if rep.passed else "FAIL", flush=True)
    (out / "exactness.csv").write_text("\n".join([header] + lines) + "\n")

    # the negative control must fail; BSC(0.5) is excluded because any index
    # shift there still yields an independent uniform output
    neg = run_exactness(ExperimentConfig(ROOT / "channels" / "bsc011.json", [1, 2],
                                         trials=args.trials, seed=args.seed, scheme="both"),
                        index_offset=1)
    emit(neg, out / "exactness_negative_control.csv")
    print("negative control", "FAIL (expected)" if not neg.passed else "PASS (unexpected)")
    print(f"{time.time() - t0:.1f}s")
    return 0 if ok and not neg.passed else 1


if __name__ == "__main__":
    sys.exit(main())
