import numpy as np
import pytest

from conftest import small_synthetic_spec
from cpmn.data.synthetic import SyntheticSpec, generate_synthetic
from cpmn.errors import ValidationError


def test_generation_deterministic():
    spec = small_synthetic_spec(num_train=5, num_test=3)
    a = generate_synthetic(spec)
    b = generate_synthetic(spec)
    for (seq_a, rec_a), (seq_b, rec_b) in zip(a.train + a.test, b.train + b.test):
        np.testing.assert_array_equal(seq_a.rgb, seq_b.rgb)
        np.testing.assert_array_equal(seq_a.flow, seq_b.flow)
        assert rec_a == rec_b


def test_ground_truth_invariants():
    ds = generate_synthetic(small_synthetic_spec(num_train=12, num_test=4))
    for seq, record in ds.train + ds.test:
        assert record.labels
        assert record.gt_segments
        for start, end, cls in record.gt_segments:
            assert 0 <= start <= end < seq.l_u
            assert cls in record.labels
        # Non-overlapping and ordered placements.
        spans = sorted((s, e) for s, e, _ in record.gt_segments)
        for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
            assert e1 < s2


def test_margin_zero_is_negative_control():
    ds = generate_synthetic(small_synthetic_spec(num_train=6, num_test=0, margin=0.0))
    assert any("margin" in w for w in ds.warnings)
    # Nearest-signature classification inside segments is at chance level.
    hits = total = 0
    for seq, record in ds.train:
        joint = seq.concatenated().astype(np.float64)
        for start, end, cls in record.gt_segments:
            for t in range(start, end + 1):
                pred = int(np.argmax(ds.primary_signatures @ joint[t]))
                hits += pred == cls
                total += 1
    assert hits / total < 0.85  # 2 classes; well below separable performance


def test_large_margin_units_classifiable_by_nearest_signature():
    # margin >= 10x noise: a nearest-signature decision on single units inside
    # segments is nearly perfect.
    ds = generate_synthetic(small_synthetic_spec(num_train=10, num_test=0))
    hits = total = 0
    for seq, record in ds.train:
        joint = seq.concatenated().astype(np.float64)
        for start, end, cls in record.gt_segments:
            for t in range(start, end + 1):
                pred = int(np.argmax(ds.primary_signatures @ joint[t]))
                hits += pred == cls
                total += 1
    assert hits / total >= 0.99


def test_infeasible_instance_length_rejected():
    with pytest.raises(ValidationError):
        SyntheticSpec(length_range=(30, 40), instance_length_range=(35, 50))


def test_two_segment_mode_layout():
    spec = small_synthetic_spec(
        num_train=8, num_test=4, two_segment=True,
        length_range=(140, 200), instance_length_range=(16, 32), window_hint=64)
    ds = generate_synthetic(spec)
    for seq, record in ds.train + ds.test:
        assert len(record.gt_segments) == 2
        (s1, e1, c1), (s2, e2, c2) = record.gt_segments
        assert c1 == c2
        assert len(record.labels) == 1
        assert e1 < spec.window_hint <= s2  # far apart: different windows
