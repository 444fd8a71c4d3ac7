import numpy as np
import pytest

from cpmn.ccm import CcmHyper
from cpmn.data.sampling import SamplerConfig
from cpmn.data.synthetic import SyntheticSpec
from cpmn.pam import PamHyper


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def small_ccm_hyper(**overrides) -> CcmHyper:
    """Desk-scale training settings used by the fast training tests."""
    base = dict(
        zeta=0.4,
        lam=1e-4,
        filters=16,
        batch_size=8,
        lr_schedule=((40, 0.05), (20, 0.01)),
        momentum=0.9,
        sampler=SamplerConfig(mode="sparse", num_segments=48),
    )
    base.update(overrides)
    return CcmHyper(**base)


def small_pam_hyper(**overrides) -> PamHyper:
    base = dict(
        window_len=64,
        lam=1e-4,
        filters=16,
        batch_size=8,
        lr_schedule=((40, 0.05), (20, 0.01)),
        momentum=0.9,
    )
    base.update(overrides)
    return PamHyper(**base)


def small_synthetic_spec(**overrides) -> SyntheticSpec:
    base = dict(
        num_classes=2,
        feature_dim=8,
        num_train=20,
        num_test=8,
        length_range=(80, 120),
        instances_range=(1, 2),
        instance_length_range=(16, 32),
        margin=10.0,
        noise=1.0,
        seed=7,
    )
    base.update(overrides)
    return SyntheticSpec(**base)
