"""Deterministic seed fan-out.

Every random stream of a run descends from one master seed:
the fold split uses ``derive_seed(master, 0)``, fold ``f`` uses
``derive_seed(master, f + 1)`` and each bank model uses
``derive_seed(fold_seed, owner_index)``.
"""

from __future__ import annotations

import numpy as np

SPLIT_KEY = 0
RERUN_KEY = 1000


def derive_seed(*keys: int) -> int:
    """Mix non-negative integers into one 32-bit seed via ``numpy.random.SeedSequence``."""
    if not keys:
        raise ValueError("derive_seed needs at least one key")
    entropy = [int(k) for k in keys]
    if min(entropy) < 0:
        raise ValueError("seed keys must be non-negative")
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def fold_seed(master: int, fold: int) -> int:
    return derive_seed(master, fold + 1)


def split_seed(master: int) -> int:
    return derive_seed(master, SPLIT_KEY)


def rerun_seed(master: int, rerun: int) -> int:
    # rerun 0 is the plain master seed so a single run matches ``train``
    return master if rerun == 0 else derive_seed(master, RERUN_KEY + rerun)
