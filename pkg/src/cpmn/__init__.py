"""Weakly supervised temporal action localization.

Trains two cascaded video classifiers with online adversarial erasing plus a
multi-scale pyramid attention module on unit-level features, fuses their
temporal class activation sequences into per-unit detection scores, and
evaluates with mAP at temporal-IoU thresholds. Everything runs at desk scale
on synthetic or file-provided feature sequences; see the README and the
``cpmn`` command-line tool.
"""

__version__ = "0.1.0"
