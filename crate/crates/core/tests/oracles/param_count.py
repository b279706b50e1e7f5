"""Trainable parameter counts by per-layer arithmetic.

Every conv and dense layer carries a bias; batch norm contributes gamma and
beta. Running statistics are not trainable and are not counted.
"""


def conv(cin, cout, k):
    return cout * cin * k * k + cout


def bn(c):
    return 2 * c


def dense(fin, fout):
    return fin * fout + fout


def diacnn(w, k):
    total = conv(3, w, 3) + bn(w)
    cin = w
    for stage in range(3):
        width = w * 2 ** stage
        for block in range(3):
            total += conv(cin, width, 3) + bn(width)
            total += conv(width, width, 3) + bn(width)
            if cin != width:
                total += conv(cin, width, 1) + bn(width)
            cin = width
    return total + dense(4 * w, k)


def baseline(k, side):
    total, cin = 0, 3
    for f in [8, 16, 32, 64, 128]:
        total += conv(cin, f, 3) + bn(f)
        cin = f
        side //= 2
    fin = 128 * side * side
    for units in [256, 128, 64, k]:
        total += dense(fin, units)
        fin = units
    return total


def mini_inception(k, w):
    h = w // 2
    total = conv(3, w, 3) + conv(3, w, 5) + bn(w)
    for _ in range(2):
        total += conv(w, h, 1) + conv(w, h, 3) + conv(w, h, 5) + 3 * bn(h)
        total += conv(3 * h + w, w, 1) + bn(w)
    total += conv(w, w, 1) + dense(w, k)
    total += conv(w, h, 1) + conv(w, h, 3) + conv(w, h, 5) + 3 * bn(h)
    total += conv(3 * h + w, 2 * w, 1) + bn(2 * w)
    return total + dense(2 * w, k)


if __name__ == "__main__":
    for w, k in [(16, 2), (12, 2), (16, 8), (4, 2)]:
        print(f"diacnn({w},{k}) = {diacnn(w, k)}")
    for k, side in [(2, 224), (8, 224), (2, 32)]:
        print(f"baseline({k},{side}) = {baseline(k, side)}")
    for k, w in [(2, 16), (8, 8)]:
        print(f"mini_inception({k},{w}) = {mini_inception(k, w)}")
