"""Error versus sample count on the five-node fixture for every sampling scheme."""

import argparse
from pathlib import Path

from ibsample.bench import BenchSpec, SCHEMES, mean_errors, run_bench
from ibsample.netgen import five_node_fixture


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--ladder", default="10,30,100,300,1000,3000")
    ap.add_argument("--out", type=Path, default=Path("five_node_bench.csv"))
    args = ap.parse_args()

    net, ev = five_node_fixture()
    ladder = tuple(int(x) for x in args.ladder.split(","))
    queries = tuple(v for v in range(len(net)) if v not in ev)
    schemes = tuple(s for s in SCHEMES if s != "exact")
    rows = run_bench(BenchSpec(net, ev, queries, schemes=schemes, ladder=ladder, runs=args.runs,
                               seed=args.seed, out=args.out))
    print("scheme".ljust(14) + "".join(f"{n:>10}" for n in ladder))
    for s in schemes:
        errs = mean_errors(rows, s)
        print(s.ljust(14) + "".join(f"{errs[n]:>10.4f}" for n in ladder))
    print(f"rows written to {args.out}")


if __name__ == "__main__":
    main()
