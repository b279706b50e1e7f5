"""Pointwise reference values for resize, blur and equalization."""
import math


def src_img():
    return [[(7 * y * y + 3 * x + x * y) % 17 * 15 for x in range(4)] for y in range(4)]


def bilinear(img, out_h, out_w):
    h, w = len(img), len(img[0])

    def coord(i, n_in, n_out):
        s = (i + 0.5) * n_in / n_out - 0.5
        return min(max(s, 0.0), n_in - 1)

    out = []
    for i in range(out_h):
        row = []
        sy = coord(i, h, out_h)
        for j in range(out_w):
            sx = coord(j, w, out_w)
            acc = 0.0
            # sum of the four neighbours weighted by their tent functions
            for yy in range(h):
                for xx in range(w):
                    wy = max(0.0, 1 - abs(sy - yy))
                    wx = max(0.0, 1 - abs(sx - xx))
                    acc += wy * wx * img[yy][xx]
            row.append(acc)
        out.append(row)
    return out


def impulse_blur(sigma, size):
    r = math.ceil(3 * sigma)
    total = sum(math.exp(-(i * i + j * j) / (2 * sigma * sigma)) for i in range(-r, r + 1) for j in range(-r, r + 1))
    c = size // 2
    return [[math.exp(-((y - c) ** 2 + (x - c) ** 2) / (2 * sigma * sigma)) / total * 255 if abs(y - c) <= r and abs(x - c) <= r else 0.0
             for x in range(size)] for y in range(size)]


def equalize(vals):
    n = len(vals)
    hist = [0] * 256
    for v in vals:
        hist[v] += 1
    cdf, acc = [], 0
    for h in hist:
        acc += h
        cdf.append(acc)
    cmin = next(cdf[v] for v in range(256) if hist[v])
    if cmin == n:
        return vals
    return [int(math.floor((cdf[v] - cmin) / (n - cmin) * 255 + 0.5)) for v in vals]


if __name__ == "__main__":
    print("src", src_img())
    print("2x2", bilinear(src_img(), 2, 2))
    print("3x5", bilinear(src_img(), 3, 5))
    k = impulse_blur(1.0, 9)
    print("blur center row", [round(v, 9) for v in k[4]])
    print("blur (2,3)", k[2][3])
    print("eq", equalize([10, 10, 20, 30, 30, 30, 200, 250]))
