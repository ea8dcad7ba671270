"""Run every registered brute-force oracle and freeze the results.

Usage: python scripts/derive_oracles.py [--out PATH]

The output JSON is read by the test suite and by ``kpmass verify-all``.
"""
import argparse
import json
import pathlib
import time

from kpmass import oracles

DEFAULT = pathlib.Path(__file__).resolve().parents[1] / "src" / "kpmass" / "data" / "frozen_oracles.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(DEFAULT))
    args = ap.parse_args()
    out = {}
    for name, (desc, inputs, _) in oracles.REGISTRY.items():
        t0 = time.perf_counter()
        values = oracles.derive(name)
        out[name] = {"description": desc, "inputs": inputs, "values": values}
        print(f"{name:<22}{time.perf_counter() - t0:8.2f}s  {values}")
    pathlib.Path(args.out).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
