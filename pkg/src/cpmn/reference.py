"""Published CPMN benchmark results, for display comparison only.

These numbers were obtained on the full THUMOS14 and ActivityNet-1.3 datasets
with pretrained two-stream feature extractors; they are not reproducible at
desk scale and are never used as test targets. The CLI prints them next to
locally computed reports so users can sanity-check orders of magnitude.
"""

# THUMOS14 mAP (%) at IoU thresholds 0.1 .. 0.7.
THUMOS14_MAP = {
    0.1: 47.1,
    0.2: 41.6,
    0.3: 32.8,
    0.4: 24.7,
    0.5: 16.1,
    0.6: 10.1,
    0.7: 5.5,
}

# ActivityNet-1.3 validation mAP (%) at IoU 0.5 / 0.75 / 0.95 and the average
# over the 0.5:0.05:0.95 grid.
ACTIVITYNET13_MAP = {
    0.5: 39.29,
    0.75: 24.09,
    0.95: 6.71,
}
ACTIVITYNET13_AVERAGE_MAP = 24.42

# Architecture comparison on THUMOS14, mAP (%) at IoU 0.5: activation
# sequence alone, plus complementary mining, plus the pyramid attention map.
ARCHITECTURE_MAP_AT_05 = {
    "original": 11.4,
    "mining": 14.5,
    "pam": 16.1,
}
