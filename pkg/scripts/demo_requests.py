#!/usr/bin/env python3
"""Run a batch of free-text requests through the pipeline and report what
got linked, what the dictionary rejected, and where the time goes.

By default this uses the bundled gaming graph and a small built-in request
set; point --requests at a file (one request per line) to try your own.
"""

import argparse
import statistics
import sys
import time
from collections import defaultdict
from pathlib import Path

from isabel.cli import format_result
from isabel.pipeline import run
from isabel.service import load_snapshot

DEFAULT_REQUESTS = [
    "I want a computer with 1 TB of storage, graphic card to play videogames and shoes.",
    "A laptop with 8 GB memory and an i3 processor, or a 512GB hard drive.",
    "Looking for an i5 processor with 8gb ram for medium gaming.",
    "Fast processor and 16 GB memory for video games.",
]


def bundled(name: str) -> Path:
    from importlib.resources import files

    return Path(str(files("isabel.data") / name))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--kg", type=Path, default=bundled("kg_gaming.json"))
    parser.add_argument("--lexicon", type=Path, default=bundled("lexicon_en.json"))
    parser.add_argument("--requests", type=Path, default=None,
                        help="file with one request per line (default: built-in set)")
    parser.add_argument("--tau", type=float, default=0.25)
    parser.add_argument("--k", type=int, default=3)
    parser.add_argument("--repeats", type=int, default=50,
                        help="timing repetitions per request")
    args = parser.parse_args()

    config = load_snapshot(args.kg, args.lexicon, tau=args.tau, k=args.k)
    if args.requests is not None:
        texts = [line for line in args.requests.read_text("utf-8").splitlines() if line.strip()]
    else:
        texts = DEFAULT_REQUESTS

    for text in texts:
        result = run(text, config)
        print(format_result(result))
        print("-" * 72)

    # Where the time goes: rerun each request --repeats times and average
    # the per-stage wall clock.
    stage_samples: dict[str, list[float]] = defaultdict(list)
    started = time.perf_counter()
    for _ in range(args.repeats):
        for text in texts:
            result = run(text, config)
            for stage, seconds in result.timings.items():
                stage_samples[stage].append(seconds)
    elapsed = time.perf_counter() - started
    total_runs = args.repeats * len(texts)

    print(f"timings over {total_runs} runs ({len(texts)} requests x {args.repeats}):")
    for stage, samples in sorted(stage_samples.items(), key=lambda kv: -statistics.mean(kv[1])):
        mean_us = statistics.mean(samples) * 1e6
        worst_us = max(samples) * 1e6
        print(f"  {stage:<14} mean {mean_us:8.1f} us   max {worst_us:8.1f} us")
    print(f"  throughput     {total_runs / elapsed:8.0f} requests/s end to end")
    return 0


if __name__ == "__main__":
    sys.exit(main())
