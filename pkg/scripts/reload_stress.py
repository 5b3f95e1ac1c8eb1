#!/usr/bin/env python3
"""Snapshot-swap churn experiment.

Serves the app in process (ASGI, no socket) and fires link requests while
the graph file underneath it keeps flipping between two variants, with a
reload racing every batch. Every response body must be byte-identical to
the response one of the two variants produces on its own -- a mixed or
torn response means the snapshot swap leaked intermediate state.

Variant B is derived from the input graph by renaming every package id,
so the two expected bodies genuinely differ.
"""

import argparse
import asyncio
import json
import sys
import tempfile
import time
from pathlib import Path

import httpx

from isabel.pipeline import result_to_json_bytes, run
from isabel.service import ServiceState, build_app, load_snapshot

PROBE = "A laptop with 8 GB memory and an i3 processor, or a 512GB hard drive."


def bundled(name: str) -> Path:
    from importlib.resources import files

    return Path(str(files("isabel.data") / name))


def alt_variant(document: bytes) -> bytes:
    doc = json.loads(document)
    for package in doc["packages"]:
        package["id"] = package["id"] + "_ALT"
    return json.dumps(doc).encode("utf-8")


async def churn(kg_path: Path, lexicon_path: Path, variants: tuple[bytes, bytes],
                expected: tuple[bytes, bytes], rounds: int, batch: int) -> dict:
    state = ServiceState(kg_path, lexicon_path)
    state.reload()
    app = build_app(state)
    transport = httpx.ASGITransport(app=app)
    tally = {"a": 0, "b": 0, "torn": 0, "reloads": 0}

    async with httpx.AsyncClient(transport=transport, base_url="http://churn") as client:
        payload = {"text": PROBE}
        for round_index in range(rounds):
            kg_path.write_bytes(variants[round_index % 2])
            responses = await asyncio.gather(
                client.post("/v1/reload"),
                *(client.post("/v1/link", json=payload) for _ in range(batch)),
            )
            if responses[0].status_code == 200:
                tally["reloads"] += 1
            for response in responses[1:]:
                assert response.status_code == 200
                body = response.content
                if body == expected[0]:
                    tally["a"] += 1
                elif body == expected[1]:
                    tally["b"] += 1
                else:
                    tally["torn"] += 1
    return tally


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--kg", type=Path, default=bundled("kg_gaming.json"))
    parser.add_argument("--lexicon", type=Path, default=bundled("lexicon_en.json"))
    parser.add_argument("--rounds", type=int, default=200)
    parser.add_argument("--batch", type=int, default=50, help="link requests per round")
    args = parser.parse_args()

    variant_a = args.kg.read_bytes()
    variant_b = alt_variant(variant_a)

    with tempfile.TemporaryDirectory() as tmp:
        live = Path(tmp) / "live_kg.json"
        expected = []
        for variant in (variant_a, variant_b):
            live.write_bytes(variant)
            config = load_snapshot(live, args.lexicon)
            expected.append(result_to_json_bytes(run(PROBE, config)))
        live.write_bytes(variant_a)

        started = time.perf_counter()
        tally = asyncio.run(churn(live, args.lexicon, (variant_a, variant_b),
                                  (expected[0], expected[1]), args.rounds, args.batch))
        elapsed = time.perf_counter() - started

    total = tally["a"] + tally["b"] + tally["torn"]
    print(f"{total} link requests in {elapsed:.2f}s "
          f"({total / elapsed:.0f} requests/s) with {tally['reloads']} reloads")
    print(f"  variant a bodies: {tally['a']}")
    print(f"  variant b bodies: {tally['b']}")
    print(f"  torn bodies:      {tally['torn']}")
    if tally["torn"] or not (tally["a"] and tally["b"]):
        print("FAIL: expected zero torn bodies and both variants observed")
        return 1
    print("ok: every response was a whole snapshot and both variants were served")
    return 0


if __name__ == "__main__":
    sys.exit(main())
