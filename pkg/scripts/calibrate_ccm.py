"""Scratch calibration: CCM training convergence on a small synthetic set."""
import sys
import time

import numpy as np

sys.path.insert(0, "tests")
from conftest import small_ccm_hyper, small_synthetic_spec

from cpmn.ccm import train_ccm
from cpmn.data import TrainingExample, generate_synthetic


def main():
    spec = small_synthetic_spec()
    ds = generate_synthetic(spec)
    train_set = [TrainingExample(features=s, labels=r.labels) for s, r in ds.train]
    hyper = small_ccm_hyper()
    t0 = time.time()
    result = train_ccm(train_set, hyper, "rgb", num_classes=spec.num_classes, seed=0)
    dt = time.time() - t0
    rows = result.history
    print(f"epochs={len(rows)} time={dt:.1f}s  ({dt/len(rows)*1000:.0f} ms/epoch)")
    for r in rows[::5] + [rows[-1]]:
        print(f"  epoch {r['epoch']:3d} lr={r['lr']:.3f} bce_a={r['bce_a']:.4f} "
              f"bce_b={r['bce_b']:.4f}")
    best_a = min(r["bce_a"] for r in rows)
    best_b = min(r["bce_b"] for r in rows)
    print(f"best bce_a={best_a:.4f} best bce_b={best_b:.4f}")


if __name__ == "__main__":
    main()
