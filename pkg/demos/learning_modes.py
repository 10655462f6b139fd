"""
Decentralized learning under each communication mode
====================================================

Eight devices with non-IID shards of a synthetic 10-class problem train a
softmax model. We compare ideal links, no links, scheduled digital and
analog links, and the one-at-a-time TDMA baselines on a short run.
"""
import numpy as np

from wireless_dsgd import ExperimentConfig, run_experiment

base = ExperimentConfig(seeds=[0, 1], blocks=30, p=0.1,
                        channel_uses_per_block=800, samples_per_device=400)

curves = {}
for mode in ("ideal", "none", "digital", "analog", "tdma_digital", "tdma_analog"):
    rows = run_experiment(base.replace(mode=mode))
    acc = np.array([r.avg_test_accuracy for r in rows]).reshape(len(base.seeds), -1)
    curves[mode] = acc.mean(axis=0)
    print(f"{mode:13s} accuracy after 10/20/30 blocks:",
          " ".join(f"{curves[mode][b - 1]:.3f}" for b in (10, 20, 30)))

# the same runs from the command line:
#   python3 -m wireless_dsgd --mode analog --seed 0,1 --blocks 30 --out analog.csv
