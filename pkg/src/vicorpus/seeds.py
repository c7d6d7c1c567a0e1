"""Deterministic seed derivation shared by the host, the stub browser, and the
injected page script.

The generators here are specified in docs/determinism.md so that independent
implementations (Python and the bundled page script) produce identical
sequences. Everything is 64-bit unsigned arithmetic, wrapping modulo 2**64.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def splitmix64_next(state: int) -> tuple[int, int]:
    """Advance one splitmix64 step: returns (new_state, output)."""
    state = (state + _GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    z = z ^ (z >> 31)
    return state, z


class SplitMix64:
    """Tiny seeded stream of 64-bit values; not for cryptographic use."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state, out = splitmix64_next(self._state)
        return out

    def next_below(self, n: int) -> int:
        """Uniform-enough index in [0, n). Modulo bias is irrelevant at our n."""
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def derive_doc_seed(run_seed: int, doc_id: str) -> int:
    """Per-document seed, independent of processing order.

    doc_seed = first splitmix64 output of state (run_seed XOR fnv1a64(doc_id)).
    """
    state = (run_seed & _MASK64) ^ fnv1a64(doc_id.encode("utf-8"))
    _, out = splitmix64_next(state)
    return out
