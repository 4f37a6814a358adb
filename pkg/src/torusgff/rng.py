"""Seeded random streams.

Every chain, walker block or sample batch draws from its own Philox stream,
keyed by ``(master seed, purpose tag, index)``. Philox is counter based, so a
stream's output depends only on its key and never on which worker consumed
it or in which order; this is what makes results independent of the thread
count.
"""

import zlib

import numpy as np


def tag_key(tag):
    """Stable 32-bit integer for a purpose tag (``hash`` is salted per run)."""
    return zlib.crc32(str(tag).encode("utf-8"))


def stream_seed(seed, tag, index=0):
    """The ``SeedSequence`` behind a stream, exposed for manifests."""
    if int(seed) < 0 or int(index) < 0:
        raise ValueError("seed and stream index must be nonnegative")
    return np.random.SeedSequence([int(seed), tag_key(tag), int(index)])


def stream(seed, tag, index=0):
    """Independent generator for ``(seed, tag, index)``."""
    return np.random.Generator(np.random.Philox(stream_seed(seed, tag, index)))


def stream_record(seed, tag, index=0):
    """JSON-friendly provenance of a stream."""
    return {"seed": int(seed), "tag": str(tag), "index": int(index)}
