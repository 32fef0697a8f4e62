"""Final median errors of GW-RLS and EF-RLS on the three 7-node topologies."""

import argparse

from excite_id import cli
from excite_id.config import preset


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs")
    args = ap.parse_args()
    for name in ["sir-network-fc", "sir-network-star", "sir-network-er"]:
        res = cli.run(preset(name), f"{args.out}/{name}")
        for label, s in res.summary["estimators"].items():
            print(f"{name:18} {label:6} B median {s['final_median_infection_error']:.2e}  R0 median {s['final_median_r0_error']:.2e}")


if __name__ == "__main__":
    main()
