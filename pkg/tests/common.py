"""Experiment settings and a trained model shared by the slower test modules.

Profiles are memoised inside ``shieldscatter.experiment``, so modules that use
the same base configuration only pay for each synthetic message pair once.
"""

from functools import lru_cache

from shieldscatter.experiment import ExperimentConfig, fit

# 1000 positives and roughly 154 negatives, a 500:77 split scaled up;
# the negatives only steer the choice of nu
BASE = ExperimentConfig(train_size=1000, trials=200, negative_ratio=0.154, seed=0)


@lru_cache(maxsize=None)
def shared_model():
    return fit(BASE)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(passed), detail)
    print(f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}")
