"""Named random substreams derived from a single top-level seed.

Every source of randomness in a run (data generation, parameter init,
splitting, Monte Carlo, minibatch shuffling) draws from its own stream so
artifacts are individually reproducible.
"""
import numpy as np

STREAMS = {
    "data": 0,
    "init": 1,
    "split": 2,
    "mc": 3,
    "shuffle": 4,
    "eval": 5,
    "projection": 6,
}


def substream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Return the generator for stream `name` (replication `index`) under `seed`."""
    if name not in STREAMS:
        raise KeyError(f"unknown stream name: {name!r}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(STREAMS[name], int(index)))
    return np.random.default_rng(ss)


def stream_seed(seed: int, name: str, index: int = 0) -> int:
    """A derived integer seed, for APIs that take a seed rather than a Generator."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(STREAMS[name], int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0] % (2**63))
