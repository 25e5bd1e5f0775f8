import hashlib
import logging
from typing import List

import numpy as np

from .exceptions import SpecError

logger = logging.getLogger(__name__)

_U64 = (1 << 64) - 1


class SeedStreams:
    def __init__(self, base_seed: int):
        """
        Independent, reproducible random streams derived from one base seed

        Every stream is a Philox counter-based generator keyed by an MD5 hash
        of (base seed, stream label, index), so replicate i of a study draws
        the same numbers however replicates are scheduled.

        Args:
            base_seed: Unsigned 64-bit base seed
        """
        if not 0 <= int(base_seed) <= _U64:
            raise SpecError(f"Seed must be an unsigned 64-bit integer, got {base_seed}")
        self.base_seed = int(base_seed)

    def _get_hash(self, key: str) -> int:
        """
        Calculate hash for a key using MD5

        Args:
            key: The key to hash

        Returns:
            Integer hash value
        """
        return int(hashlib.md5(key.encode()).hexdigest(), 16)

    def seed_for(self, label: str, index: int = 0) -> int:
        """128-bit entropy for stream (label, index)"""
        return self._get_hash(f"{self.base_seed}:{label}:{index}")

    def generator(self, label: str, index: int = 0) -> np.random.Generator:
        """
        Random generator for one stream

        Args:
            label: Stream name, e.g. "bootstrap" or "cv"
            index: Replicate or repeat index

        Returns:
            numpy Generator backed by Philox
        """
        entropy = self.seed_for(label, index)
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))

    def generators(self, label: str, count: int) -> List[np.random.Generator]:
        return [self.generator(label, i) for i in range(count)]
