"""Independent brute-force implementation of two-subiteration thinning.

Deliberately written per-pixel from the published deletion rules, with no
code shared with the package implementation; serves as the oracle.
"""

import numpy as np


def _neighbours(img, x, y):
    """P2..P9 clockwise from north, zero outside the image."""
    h, w = img.shape

    def at(i, j):
        if 0 <= i < h and 0 <= j < w:
            return int(img[i, j])
        return 0

    return [
        at(x - 1, y), at(x - 1, y + 1), at(x, y + 1), at(x + 1, y + 1),
        at(x + 1, y), at(x + 1, y - 1), at(x, y - 1), at(x - 1, y - 1),
    ]


def _transitions(n):
    seq = n + n[:1]
    return sum(1 for a, b in zip(seq, seq[1:]) if (a, b) == (0, 1))


def reference_thin(mask):
    img = np.array(mask, dtype=np.uint8)
    if img.ndim == 3:
        img = img[:, :, 0]
    changed = True
    while changed:
        changed = False
        for second in (False, True):
            marked = []
            h, w = img.shape
            for x in range(h):
                for y in range(w):
                    if img[x, y] != 1:
                        continue
                    n = _neighbours(img, x, y)
                    p2, p3, p4, p5, p6, p7, p8, p9 = n
                    if not (2 <= sum(n) <= 6):
                        continue
                    if _transitions(n) != 1:
                        continue
                    if second:
                        if p2 * p4 * p8 != 0 or p2 * p6 * p8 != 0:
                            continue
                    else:
                        if p2 * p4 * p6 != 0 or p4 * p6 * p8 != 0:
                            continue
                    marked.append((x, y))
            for x, y in marked:
                img[x, y] = 0
            if marked:
                changed = True
    return img
