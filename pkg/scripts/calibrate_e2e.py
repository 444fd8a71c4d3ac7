"""Scratch calibration: full pipeline on the acceptance-scale synthetic set."""
import os
import sys
import time

import numpy as np

from cpmn.ccm import CcmHyper
from cpmn.config import RunConfig
from cpmn.data import TrainingExample, generate_synthetic
from cpmn.data.sampling import SamplerConfig
from cpmn.data.synthetic import SyntheticSpec
from cpmn.evaluation import evaluate
from cpmn.localization import LocalizationOptions
from cpmn.pam import PamHyper
from cpmn.pipeline import (
    detections_for_eval,
    ground_truth_from_records,
    infer_dataset,
    train_all,
)


def acceptance_spec(seed=0):
    return SyntheticSpec(
        num_classes=4, feature_dim=16, num_train=60, num_test=20,
        length_range=(80, 200), instances_range=(1, 3),
        instance_length_range=(16, 48), margin=10.0, noise=1.0, seed=seed)


def acceptance_config(seed=0, ccm_filters=32, pam_filters=32):
    return RunConfig(
        seed=seed,
        ccm=CcmHyper(filters=ccm_filters, lam=0.0025, batch_size=16,
                     lr_schedule=((40, 0.05), (20, 0.01)), momentum=0.9,
                     sampler=SamplerConfig(mode="sparse", num_segments=64)),
        pam=PamHyper(filters=pam_filters, lam=0.0025, batch_size=16,
                     lr_schedule=((100, 0.3), (50, 0.05)), momentum=0.9),
    )


def main(seed=0):
    t0 = time.time()
    ds = generate_synthetic(acceptance_spec(seed))
    train_set = [TrainingExample(features=s, labels=r.labels) for s, r in ds.train]
    config = acceptance_config(seed)
    models, history = train_all(train_set, config)
    t_train = time.time() - t0
    print(f"train {t_train:.0f}s; final bce: "
          + " ".join(f"{k}={rows[-1].get('bce', rows[-1].get('bce_a', 0)):.3f}"
                     for k, rows in history.items()))
    videos = [s for s, _ in ds.test]
    t1 = time.time()
    results = infer_dataset(videos, models, config)
    t_infer = time.time() - t1
    dets = detections_for_eval(results)
    gts = ground_truth_from_records(ds.test)
    report = evaluate(dets, gts, (0.1, 0.3, 0.5, 0.7))
    print(f"infer {t_infer:.0f}s; detections={len(dets)} gts={len(gts)}")
    print("mAP:", {a: round(m, 4) for a, m in report.map_at.items()})
    print(f"total {time.time() - t0:.0f}s")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
