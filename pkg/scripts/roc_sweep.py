"""ROC curves of the detector over the eta and tau grids of the roc-sweep preset."""

import argparse

from excite_id import cli
from excite_id.config import preset


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=None)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = preset("roc-sweep")
    cfg.seed = args.seed
    for e in cfg.estimators:
        curves = cli.roc_sweep(cfg, e, args.trials)
        print(f"{e.label}:")
        for c in curves:
            pts = " ".join(f"({fr:.3f},{t:.2f})" for fr, t in zip(c.fp_rate, c.tpr))
            print(f"  eta={c.eta:<4} AUC={c.auc():.3f}  {pts}")


if __name__ == "__main__":
    main()
