"""LFSR-driven choice of parameter set per block, and decoy delta^-1 picks.

The generator is a 16-bit Fibonacci LFSR with taps 16, 14, 13, 11
(x^16 + x^14 + x^13 + x^11 + 1, primitive, period 65535). It is a
proof-of-concept scheduler only and offers no cryptographic strength.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PERIOD = 2**16 - 1


def lfsr_step(reg: int) -> tuple:
    """Shift once; returns (output bit, new register). The output is the bit shifted out."""
    out = reg & 1
    fb = (reg ^ (reg >> 2) ^ (reg >> 3) ^ (reg >> 5)) & 1
    return out, (reg >> 1) | (fb << 15)


def lfsr_next_bits(reg: int, k: int) -> tuple:
    """k output bits packed first-out-most-significant; returns (value, new register)."""
    if reg == 0:
        raise ValueError("LFSR register must be nonzero")
    v = 0
    for _ in range(k):
        bit, reg = lfsr_step(reg)
        v = (v << 1) | bit
    return v, reg


class Lfsr:
    def __init__(self, seed: int):
        seed &= 0xFFFF
        if seed == 0:
            raise ValueError("LFSR seed must be nonzero (the all-zero state never leaves zero)")
        self.register = seed

    def next_bits(self, k: int) -> int:
        v, self.register = lfsr_next_bits(self.register, k)
        return v

    def __repr__(self):
        return f"Lfsr(0x{self.register:04x})"


def index_bits(n: int) -> int:
    return math.ceil(math.log2(n)) if n > 1 else 0


@dataclass
class RandomizationContext:
    """Mutable scheduling state shared (by seed) between encryptor and decryptor."""

    main: Lfsr
    decoy: Lfsr
    catalog: list
    _packed: object = field(default=None, repr=False)

    @classmethod
    def from_seed(cls, seed: int, catalog: list) -> "RandomizationContext":
        """Split a 32-bit seed: high half seeds the set scheduler, low half the decoys."""
        if not 0 <= seed < 2**32:
            raise ValueError("seed must be a 32-bit value")
        if not catalog:
            raise ValueError("catalog is empty")
        return cls(Lfsr(seed >> 16), Lfsr(seed & 0xFFFF), list(catalog))

    @property
    def packed(self):
        if self._packed is None:
            from .aes import packed_for

            self._packed = packed_for(tuple(self.catalog))
        return self._packed

    def _draw(self, lfsr: Lfsr) -> int:
        n = len(self.catalog)
        return lfsr.next_bits(index_bits(n)) % n

    def select_index(self) -> int:
        return self._draw(self.main)

    def select_param_set(self):
        return self.catalog[self.select_index()]

    def schedule(self, n: int):
        """Set indices for the next n blocks."""
        return np.array([self.select_index() for _ in range(n)], dtype=np.int64)

    def select_decoys(self, exclude: int) -> tuple:
        """Two distinct catalog ids other than exclude, by rejection sampling."""
        if len(self.catalog) < 3:
            raise ValueError("decoy selection needs a catalog of at least 3 sets")
        first = self._draw(self.decoy)
        while first == exclude:
            first = self._draw(self.decoy)
        second = self._draw(self.decoy)
        while second == exclude or second == first:
            second = self._draw(self.decoy)
        return first, second

    def decoy_schedule(self, set_idx) -> np.ndarray:
        return np.array([self.select_decoys(int(i)) for i in set_idx], dtype=np.int64).reshape(-1, 2)
