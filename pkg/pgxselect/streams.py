"""Counter-based random streams for reproducible parallel work."""

import numpy as np


def substream(seed: int, index: int) -> np.random.Generator:
    """Generator for work unit ``index`` under root ``seed``.

    Equal to ``substreams(seed, n)[index]`` for any n > index, so results do
    not depend on how units are scheduled across processes.
    """
    sequence = np.random.SeedSequence(seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(sequence))


def substreams(seed: int, n_streams: int) -> list[np.random.Generator]:
    return [substream(seed, index) for index in range(n_streams)]
