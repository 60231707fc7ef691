"""SplitMix64, shared bit-for-bit with the compiled kernel."""

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = z = (self.state + GOLDEN) & MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def bits(self, k: int) -> int:
        """Uniform integer in [0, 2**k) from the top ``k`` bits."""
        if k == 0:
            self.next_u64()
            return 0
        return self.next_u64() >> (64 - k)
