#!/usr/bin/env python3
"""Pin the exhaustive-oracle results for the 12-asset fixture.

Run once after (re)generating fixtures; tests compare fresh enumeration
output against this file to catch scoring or enumeration regressions.
"""

import json
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent
OUT = ROOT / "tests" / "data"


def main():
    sys.path.insert(0, str(ROOT / "src"))
    from qubofolio import build_market_model, load_prices
    from qubofolio.solvers import exhaustive_best

    OUT.mkdir(parents=True, exist_ok=True)
    doc = {}
    for name in ("synth12", "planted12"):
        path = ROOT / "src" / "qubofolio" / "fixtures" / f"{name}.csv"
        model = build_market_model(load_prices(path, "MKT"))
        result = exhaustive_best(model)
        doc[name] = {
            "best": {
                "mask": result.best.portfolio.to_literal(),
                "size": result.best.size,
                "cqns": result.best.cqns,
                "expected_return": result.best.expected_return,
                "variance": result.best.variance,
            },
            "per_size": {
                str(m): {"mask": sp.portfolio.to_literal(), "cqns": sp.cqns}
                for m, sp in result.per_size.items()
            },
            "n_scored": result.n_scored,
        }
        print(f"{name}: best size {result.best.size}, cqns {result.best.cqns:.8f}")

    target = OUT / "oracle12.json"
    with open(target, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {target}")


if __name__ == "__main__":
    main()
