"""Writes the PNG fixtures with a minimal encoder built on zlib and struct,
plus one flat JPEG through Pillow.

Run from this directory: python3 write_png_fixtures.py
"""
import struct
import zlib


def chunk(tag, data):
    body = tag + data
    return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)


def png(width, height, color_type, rows):
    # color_type 2 = RGB, 0 = grayscale; bit depth 8, filter 0 on every row
    raw = b"".join(b"\x00" + bytes(r) for r in rows)
    ihdr = struct.pack(">IIBBBBB", width, height, 8, color_type, 0, 0, 0)
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"IDAT", zlib.compress(raw, 9)) + chunk(b"IEND", b"")


RGB = [
    [255, 0, 0, 0, 255, 0],
    [0, 0, 255, 10, 20, 30],
]
GRAY = [[0, 64, 128], [192, 255, 7]]

if __name__ == "__main__":
    rgb = png(2, 2, 2, RGB)
    with open("../fixtures/rgb_2x2.png", "wb") as f:
        f.write(rgb)
    with open("../fixtures/gray_3x2.png", "wb") as f:
        f.write(png(3, 2, 0, GRAY))
    with open("../fixtures/truncated.png", "wb") as f:
        f.write(rgb[: len(rgb) - 20])
    # JPEG is lossy, so only a flat colour block with a loose tolerance.
    from PIL import Image

    Image.new("RGB", (8, 8), (200, 100, 50)).save("../fixtures/flat_8x8.jpg", quality=95)
    print("rgb_2x2 HWC:", [v for row in RGB for v in row])
    print("gray_3x2:", [v for row in GRAY for v in row])
