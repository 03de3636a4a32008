"""Shared fixtures.

The expensive repeated-run experiment is session-scoped because both the
benchmark tests and the acceptance suite read the same summary.
"""

import numpy as np
import pytest

from kgarrote.bench import make_design, run_experiment


def seeded_rng(*key):
    """Deterministic generator from a structured seed key."""
    return np.random.default_rng(np.random.SeedSequence(list(key)))


@pytest.fixture(scope="session")
def example2_summary_50():
    """Gaussian-kernel selection experiment on the nonadditive design, 50 runs."""
    design = make_design("example-2", n=64)
    return run_experiment(design, "gaussian", runs=50, seed=123)
