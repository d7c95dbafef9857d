"""Regenerate the bundled test glyphs in src/snn_sense/data."""

import os

import numpy as np

from snn_sense.pgm import save_pgm

OUT = os.path.join(os.path.dirname(__file__), "..", "src", "snn_sense", "data")


def ring(n, r_in, r_out):
    c = (n - 1) / 2.0
    yy, xx = np.mgrid[:n, :n]
    r = np.hypot(yy - c, xx - c)
    return ((r >= r_in) & (r <= r_out)).astype(float)


def cross(n):
    x = np.zeros((n, n))
    x[n // 2 - 1 : n // 2 + 1, 1:-1] = 1.0
    x[1:-1, n // 2 - 1 : n // 2 + 1] = 1.0
    return x


def bars(n):
    x = np.zeros((n, n))
    x[1:-1, 2] = 1.0
    x[1:-1, n - 3] = 0.6
    x[1, 2 : n - 2] = 0.8
    return x


def seven(n=28):
    """A thick stroke seven on a dark background, MNIST sized."""
    x = np.zeros((n, n))
    x[5:9, 6:22] = 1.0
    for row in range(9, 24):
        col = int(round(21 - (row - 9) * 0.55))
        x[row, col - 2 : col + 2] = 1.0
    x[4, 6:22] = 0.5
    x[5:9, 22] = 0.5
    return x


def main():
    glyphs = {
        "glyph_ring_10.pgm": ring(10, 2.0, 4.0),
        "glyph_cross_10.pgm": cross(10),
        "glyph_bars_10.pgm": bars(10),
        "glyph_seven_28.pgm": seven(),
    }
    for name, img in glyphs.items():
        save_pgm(img, os.path.join(OUT, name))
        print(name, img.shape)


if __name__ == "__main__":
    main()
