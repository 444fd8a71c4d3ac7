import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpmn.errors import ShapeError, ValidationError
from cpmn.localization import (
    LocalizationOptions,
    Proposal,
    attention_fuse,
    extract_proposals,
    map_to_units,
    nms,
    score_proposal,
    select_top_classes,
    threshold_runs,
)
from cpmn.evaluation import temporal_iou
from cpmn.nnkernel import sigmoid


# --- oracles ------------------------------------------------------------------

def brute_force_runs(values, threshold):
    """Threshold-scan oracle: collect maximal above-threshold runs one index at
    a time."""
    runs, current = [], None
    for t, v in enumerate(values):
        if v > threshold:
            current = [t, t] if current is None else [current[0], t]
        else:
            if current is not None:
                runs.append(tuple(current))
            current = None
    if current is not None:
        runs.append(tuple(current))
    return runs


def reference_nms(proposals, threshold):
    """Independent quadratic greedy suppression, same declared tie rules."""
    order = sorted(range(len(proposals)),
                   key=lambda i: (-proposals[i].p_conf, proposals[i].start, i))
    kept = []
    for i in order:
        p = proposals[i]
        ok = True
        for q in kept:
            if q.label != p.label:
                continue
            inter = min(p.end, q.end) - max(p.start, q.start) + 1
            if inter > 0:
                union = (p.end - p.start + 1) + (q.end - q.start + 1) - inter
                if inter / union > threshold:
                    ok = False
                    break
        if ok:
            kept.append(p)
    return kept


def random_proposals(rng, count):
    out = []
    for _ in range(count):
        start = int(rng.integers(0, 30))
        end = start + int(rng.integers(0, 12))
        out.append(Proposal(start=start, end=end, label=int(rng.integers(2)),
                            p_act=0.5, p_class=0.5,
                            p_conf=float(rng.choice([0.1, 0.3, 0.5, 0.9])),
                            modality="rgb"))
    return out


# --- attention fusion -----------------------------------------------------------

def test_fuse_sigmoid_of_zero():
    out = attention_fuse(np.zeros((1, 1)), np.array([[0.5]]))
    assert out[0, 0] == pytest.approx(0.25)


def test_fuse_zero_heatmap_annihilates(rng):
    cas = rng.normal(size=(6, 2))
    heat = np.ones((6, 2))
    heat[2, 1] = 0.0
    assert attention_fuse(cas, heat)[2, 1] == 0.0


def test_fuse_matches_elementwise_oracle(rng):
    cas = rng.normal(size=(7, 3))
    heat = rng.random((7, 3))
    fused = attention_fuse(cas, heat)
    for t in range(7):
        for c in range(3):
            expected = (1.0 / (1.0 + np.exp(-cas[t, c]))) * heat[t, c]
            assert fused[t, c] == pytest.approx(expected, abs=1e-12)


def test_fuse_literal_form(rng):
    cas = rng.random((5, 2))
    heat = rng.random((5, 2))
    np.testing.assert_allclose(attention_fuse(cas, heat, "literal"), cas * heat)


def test_fuse_shape_mismatch(rng):
    with pytest.raises(ShapeError):
        attention_fuse(np.zeros((4, 2)), np.zeros((5, 2)))


# --- class selection ---------------------------------------------------------------

def test_top_two_by_score():
    logits = np.log(np.array([0.9, 0.1, 0.8]) / (1 - np.array([0.9, 0.1, 0.8])))
    classes, p_class = select_top_classes([logits], k=2)
    assert sorted(classes) == [0, 2]
    assert p_class[0] == pytest.approx(0.9)
    assert p_class[2] == pytest.approx(0.8)


def test_top_two_tie_breaks_to_lower_index():
    classes, _ = select_top_classes([np.array([1.0, 1.0, 1.0])], k=2)
    assert classes == [0, 1]


def test_two_classes_always_both_selected(rng):
    classes, _ = select_top_classes([rng.normal(size=2)], k=2)
    assert sorted(classes) == [0, 1]


def test_scores_average_over_vectors():
    _, p_class = select_top_classes([np.array([10.0, -10.0]),
                                     np.array([-10.0, -10.0])], k=2)
    assert p_class[0] == pytest.approx(0.5, abs=1e-4)


# --- proposal extraction -------------------------------------------------------------

def test_extract_threshold_runs_example():
    phi = np.array([[0.1], [0.5], [0.6], [0.1], [0.7]])
    drafts = extract_proposals(phi, [0], "rgb", threshold_ratio=0.2)
    assert [(s, e) for s, e, _, _ in drafts] == [(1, 2), (4, 4)]


def test_extract_constant_positive_single_run():
    phi = np.full((9, 1), 0.3)
    drafts = extract_proposals(phi, [0], "rgb")
    assert [(s, e) for s, e, _, _ in drafts] == [(0, 8)]


def test_extract_all_zero_yields_nothing():
    assert extract_proposals(np.zeros((6, 2)), [0, 1], "rgb") == []


@given(st.integers(0, 100_000))
@settings(max_examples=100, deadline=None)
def test_extract_matches_brute_force_oracle(seed):
    rng = np.random.default_rng(seed)
    phi = rng.random((int(rng.integers(1, 40)), 1)) * rng.choice([0.0, 1.0])
    drafts = extract_proposals(phi, [0], "rgb", threshold_ratio=0.2)
    theta = 0.2 * phi[:, 0].max()
    assert [(s, e) for s, e, _, _ in drafts] == brute_force_runs(phi[:, 0], theta)


@given(st.integers(0, 100_000))
@settings(max_examples=60, deadline=None)
def test_extracted_runs_are_maximal_and_disjoint(seed):
    rng = np.random.default_rng(seed)
    phi = rng.random((25, 1))
    theta = 0.2 * phi[:, 0].max()
    drafts = extract_proposals(phi, [0], "rgb", threshold_ratio=0.2)
    spans = [(s, e) for s, e, _, _ in drafts]
    for (s, e) in spans:
        assert (phi[s:e + 1, 0] > theta).all()
        if s > 0:
            assert phi[s - 1, 0] <= theta
        if e < 24:
            assert phi[e + 1, 0] <= theta
    for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
        assert e1 < s2


# --- scoring ----------------------------------------------------------------------

def test_score_constant_mean():
    fused = {"rgb": np.full((10, 1), 0.4), "flow": np.full((10, 1), 0.4)}
    p = score_proposal(2, 6, 0, fused, p_class=0.8, modality="rgb")
    assert p.p_act == pytest.approx(0.4)
    assert p.p_conf == pytest.approx(0.32)


def test_score_single_unit():
    fused = {"rgb": np.array([[0.1], [0.9], [0.2]]),
             "flow": np.array([[0.3], [0.5], [0.2]])}
    p = score_proposal(1, 1, 0, fused, p_class=1.0, modality="flow")
    assert p.p_act == pytest.approx(0.7)


def test_score_out_of_range():
    with pytest.raises(ValidationError):
        score_proposal(0, 10, 0, {"rgb": np.zeros((5, 1))}, 0.5, "rgb")


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_score_consistency(seed):
    rng = np.random.default_rng(seed)
    fused = {"rgb": rng.random((12, 2)), "flow": rng.random((12, 2))}
    start = int(rng.integers(0, 6))
    end = start + int(rng.integers(0, 6))
    p = score_proposal(start, end, 1, fused, p_class=float(rng.random()), modality="rgb")
    assert p.p_conf == p.p_act * p.p_class


# --- NMS ---------------------------------------------------------------------------

def _prop(start, end, score, label=0):
    return Proposal(start=start, end=end, label=label, p_act=score, p_class=1.0,
                    p_conf=score, modality="rgb")


def test_nms_overlap_example():
    a, b = _prop(0, 10, 0.9), _prop(5, 15, 0.8)
    assert temporal_iou((0, 10), (5, 15)) == pytest.approx(6 / 16)
    kept = nms([a, b], threshold=0.3)
    assert kept == [a]


def test_nms_disjoint_all_kept():
    props = [_prop(0, 4, 0.9), _prop(10, 14, 0.5), _prop(20, 24, 0.7)]
    assert len(nms(props, threshold=0.3)) == 3


def test_nms_identical_keeps_one():
    props = [_prop(3, 8, 0.5), _prop(3, 8, 0.5)]
    assert len(nms(props, threshold=0.5)) == 1


def test_nms_different_classes_do_not_suppress():
    props = [_prop(0, 10, 0.9, label=0), _prop(0, 10, 0.8, label=1)]
    assert len(nms(props, threshold=0.3)) == 2


@given(st.integers(0, 100_000), st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9]))
@settings(max_examples=100, deadline=None)
def test_nms_matches_reference_and_contract(seed, threshold):
    rng = np.random.default_rng(seed)
    props = random_proposals(rng, int(rng.integers(0, 9)))
    kept = nms(props, threshold)
    assert kept == reference_nms(props, threshold)
    # Contract: kept same-class pairs never exceed the threshold; dropped
    # proposals overlap some higher-scored kept one; output is a subset.
    for i, p in enumerate(kept):
        for q in kept[i + 1:]:
            if p.label == q.label:
                assert temporal_iou(p.interval(), q.interval()) <= threshold
    for p in props:
        if p not in kept:
            assert any(q.label == p.label and q.p_conf >= p.p_conf and
                       temporal_iou(p.interval(), q.interval()) > threshold
                       for q in kept)
    assert all(p in props for p in kept)


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_nms_monotone_in_threshold(seed):
    rng = np.random.default_rng(seed)
    props = random_proposals(rng, 8)
    sizes = [len(nms(props, th)) for th in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert sizes == sorted(sizes)


# --- coordinate mapping ---------------------------------------------------------------

def test_map_to_units_identity():
    values = np.arange(6, dtype=float).reshape(6, 1)
    np.testing.assert_array_equal(map_to_units(values, np.arange(6), 6), values)


def test_map_to_units_nearest_fill():
    values = np.array([[0.0], [10.0]])
    out = map_to_units(values, np.array([0, 4]), 6)
    # Ties go to the earlier sample: unit 2 is equidistant, takes value 0.
    np.testing.assert_array_equal(out.ravel(), [0.0, 0.0, 0.0, 10.0, 10.0, 10.0])


def test_map_to_units_validates_indices():
    with pytest.raises(ValidationError):
        map_to_units(np.zeros((2, 1)), np.array([0, 0]), 4)
    with pytest.raises(ValidationError):
        map_to_units(np.zeros((2, 1)), np.array([0, 9]), 4)


def test_threshold_runs_strict_inequality():
    assert threshold_runs(np.zeros(5), 0.0) == []


def test_options_validation():
    with pytest.raises(ValidationError):
        LocalizationOptions(score_form="tanh")
    with pytest.raises(ValidationError):
        LocalizationOptions(threshold_ratio=0.0)
