#!/usr/bin/env python3
"""Standalone Middlebury flow-wheel renderer, written as a binary PPM.

usage: flow_wheel.py SIZE OUT.ppm
"""
import math
import sys


def wheel():
    ry, yg, gc, cb, bm, mr = 15, 6, 4, 11, 13, 6
    cols = []
    cols += [(255, 255 * i // ry, 0) for i in range(ry)]
    cols += [(255 - 255 * i // yg, 255, 0) for i in range(yg)]
    cols += [(0, 255, 255 * i // gc) for i in range(gc)]
    cols += [(0, 255 - 255 * i // cb, 255) for i in range(cb)]
    cols += [(255 * i // bm, 0, 255) for i in range(bm)]
    cols += [(255, 0, 255 - 255 * i // mr) for i in range(mr)]
    return cols


def color(cols, u, v):
    n = len(cols)
    rad = min(math.sqrt(u * u + v * v), 1.0)
    a = math.atan2(-v, -u) / math.pi
    fk = (a + 1.0) / 2.0 * (n - 1)
    k0 = int(math.floor(fk))
    k1 = (k0 + 1) % n
    f = fk - k0
    out = []
    for ch in range(3):
        col = (1.0 - f) * (cols[k0][ch] / 255.0) + f * (cols[k1][ch] / 255.0)
        col = 1.0 - rad * (1.0 - col)
        out.append(int(math.floor(255.0 * col)))
    return out


def main():
    size = int(sys.argv[1])
    cols = wheel()
    c = (size - 1.0) / 2.0
    data = bytearray()
    for y in range(size):
        for x in range(size):
            data += bytes(color(cols, (x - c) / c, (y - c) / c))
    with open(sys.argv[2], "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (size, size))
        f.write(data)


if __name__ == "__main__":
    main()
