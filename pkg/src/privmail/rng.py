"""Seeded random streams.

Every stochastic step takes a seed that may be an int, a SeedSequence, a
Generator or None; child streams are spawned from a SeedSequence so that
parallel runs stay reproducible.
"""

import numpy as np


def seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def spawn(seed, count):
    return seed_sequence(seed).spawn(count)


def as_generator(random_state):
    """Accept None, an int, a SeedSequence, a Generator or a legacy RandomState."""
    if isinstance(random_state, np.random.RandomState):
        return random_state
    return np.random.default_rng(random_state)


def seed_int(seed):
    """Collapse a seed to a 63-bit int (for configs that must stay printable)."""
    return int(seed_sequence(seed).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
