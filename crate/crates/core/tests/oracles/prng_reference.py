"""Independent reference for the xorshift64* generator used for splits and shuffles.

Prints the values pinned in tests/rng_reference.rs.
"""
M = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(z):
    z = (z + GOLDEN) & M
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M
    return z ^ (z >> 31)


class Rng:
    def __init__(self, seed):
        s = splitmix64(seed)
        self.s = s if s else GOLDEN

    def u64(self):
        x = self.s
        x ^= x >> 12
        x ^= (x << 25) & M
        x ^= x >> 27
        self.s = x
        return (x * 0x2545F4914F6CDD1D) & M

    def below(self, n):
        threshold = ((1 << 64) - n) % n
        while True:
            m = self.u64() * n
            if (m & M) >= threshold:
                return m >> 64

    def shuffle(self, items):
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def derive_seed(seed, stream):
    return splitmix64(seed ^ splitmix64((stream + 0x5851F42D4C957F2D) & M))


r = Rng(42)
print("seed 42 u64:", [hex(r.u64()) for _ in range(5)])
r = Rng(0)
print("seed 0 u64:", [hex(r.u64()) for _ in range(3)])
r = Rng(7)
perm = list(range(10))
r.shuffle(perm)
print("seed 7 shuffle(10):", perm)
r = Rng(42)
print("seed 42 f64:", [repr((r.u64() >> 11) * 2.0 ** -53) for _ in range(3)])
print("derive_seed(7, 0):", hex(derive_seed(7, 0)), "derive_seed(7, 1):", hex(derive_seed(7, 1)))
# epoch shuffles used by batch iteration: stream = epoch
for epoch in range(2):
    r = Rng(derive_seed(11, epoch))
    perm = list(range(10))
    r.shuffle(perm)
    print(f"batch shuffle seed 11 epoch {epoch}:", perm)
