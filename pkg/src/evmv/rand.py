"""Deterministic random streams.

Every stochastic component draws from a Philox counter-based generator
keyed by (seed, stream id), so any piece of the pipeline can be replayed
in isolation. Stream ids 0-3 are reserved below; the typo-noise module
derives one substream per corpus line at PERTURB_STREAM_BASE + line.
"""

import numpy as np

DEFAULT_SEED = 12

STREAM_INIT = 0
STREAM_SHUFFLE = 1
STREAM_SPLIT = 2
STREAM_SYNTH = 3
PERTURB_STREAM_BASE = 1 << 32


def stream(seed, stream_id):
    return np.random.Generator(np.random.Philox(key=[seed, stream_id]))
