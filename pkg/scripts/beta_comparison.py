"""Video vs non-video OSNR and blocking with and without the video term in the cost.

    python scripts/beta_comparison.py --load 350 --seeds 1,2,3,4,5
"""

import argparse

from eonvideo.config import resolve_estimator
from eonvideo.rsa import NON_VIDEO, VIDEO, CostWeights
from eonvideo.simulator import ScenarioConfig, run_load


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--topology", default="nsfnet")
    ap.add_argument("--load", type=float, default=350.0)
    ap.add_argument("--seeds", type=lambda t: [int(x) for x in t.split(",")], default=[1, 2, 3, 4, 5])
    ap.add_argument("--betas", type=lambda t: [float(x) for x in t.split(",")], default=[0.0, 1.0])
    args = ap.parse_args()

    est = resolve_estimator("default")
    print("beta  seed  osnr_video  osnr_nonvideo  gap_db  bp_video  bp_nonvideo  rel_bp_gap")
    for beta in args.betas:
        for seed in args.seeds:
            cfg = ScenarioConfig(topology=args.topology, seed=seed, weights=CostWeights(1.0, beta))
            r = run_load(cfg, args.load, estimator=est)
            v, n = r.per_kind[VIDEO].summary(), r.per_kind[NON_VIDEO].summary()
            gap = v["mean_osnr_db"] - n["mean_osnr_db"]
            rel = abs(v["bp"] - n["bp"]) / n["bp"] if n["bp"] else float("nan")
            print(f"{beta:4.1f}  {seed:4d}  {v['mean_osnr_db']:10.2f}  {n['mean_osnr_db']:13.2f}  "
                  f"{gap:+6.2f}  {v['bp']:8.4f}  {n['bp']:11.4f}  {rel:10.3f}", flush=True)


if __name__ == "__main__":
    main()
