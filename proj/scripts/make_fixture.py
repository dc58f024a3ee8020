#!/usr/bin/env python3
"""Generates the committed data/ fixtures.

Outputs (all deterministic, seed 20240501):
  data/test-images-idx3-ubyte   1000 synthetic 28x28 grayscale digits in IDX
                                format, 100 per class, labels interleaved so
                                any prefix stays balanced
  data/test-labels-idx1-ubyte   matching IDX label file
  data/model_weights.csv        10x121 binary template matrix trained for
                                raw-overlap argmax matching on the pooled
                                11x11 bits (frequency-ranked start, greedy
                                single-cell flips to convergence)
  data/model_thresholds.txt     single integer threshold for the layer

The digits are seven-segment style glyphs with 4 px strokes, jittered by
one-pixel shifts, per-image luminance, and sub-threshold background speckle.
"""

import os
import random
import struct

import numpy as np

SEED = 20240501
N_IMAGES = 1000
THRESHOLD = 2

# Segment rectangles (x0, y0, x1, y1) inside a 20x26 glyph cell.
SEGMENTS = {
    "A": (3, 1, 17, 5),
    "B": (14, 3, 18, 13),
    "C": (14, 13, 18, 23),
    "D": (3, 21, 17, 25),
    "E": (2, 13, 6, 23),
    "F": (2, 3, 6, 13),
    "G": (3, 11, 17, 15),
}

DIGIT_SEGMENTS = {
    0: "ABCDEF",
    1: "BC",
    2: "ABGED",
    3: "ABGCD",
    4: "FGBC",
    5: "AFGCD",
    6: "AFGECD",
    7: "ABC",
    8: "ABCDEFG",
    9: "ABCDFG",
}


def render(digit, dx=0, dy=0, lum=255):
    img = [[0] * 28 for _ in range(28)]
    for seg in DIGIT_SEGMENTS[digit]:
        x0, y0, x1, y1 = SEGMENTS[seg]
        for y in range(y0, y1):
            for x in range(x0, x1):
                xx, yy = x + 4 + dx, y + 1 + dy
                if 0 <= xx < 28 and 0 <= yy < 28:
                    img[yy][xx] = lum
    return img


def pool_bits(img, threshold=128):
    """Integer 28->11 area pooling: overlaps in elevenths of a pixel."""
    def ov(t, s):
        return max(0, min(28 * (t + 1), 11 * (s + 1)) - max(28 * t, 11 * s))

    bits = []
    for ti in range(11):
        for tj in range(11):
            acc = 0
            for si in range(28):
                wr = ov(ti, si)
                if not wr:
                    continue
                for sj in range(28):
                    wc = ov(tj, sj)
                    if wc:
                        acc += wr * wc * img[si][sj]
            bits.append(1 if acc >= threshold * 784 else 0)
    return bits


def make_images():
    rng = random.Random(SEED)
    images, labels = [], []
    for i in range(N_IMAGES):
        digit = i % 10
        img = render(digit, dx=rng.randint(-1, 1), dy=rng.randint(-1, 1),
                     lum=rng.randint(200, 255))
        for _ in range(rng.randint(0, 25)):  # background speckle, below binarization
            r, c = rng.randrange(28), rng.randrange(28)
            img[r][c] = max(img[r][c], rng.randint(0, 110))
        images.append(img)
        labels.append(digit)
    return images, labels


def train_templates(bits, labels):
    """Binary templates for raw-overlap argmax matching (ties to the lowest
    class index, the same rule the strongest-output-current readout uses).
    Start from each class's 32 most frequent cells, then greedily flip the
    single template cell that improves accuracy the most, to convergence."""
    B = np.asarray(bits, dtype=np.int32)
    y = np.asarray(labels)
    freq = np.stack([B[y == d].mean(axis=0) for d in range(10)])
    T = np.zeros((10, 121), dtype=np.int32)
    for d in range(10):
        T[d, np.lexsort((np.arange(121), -freq[d]))[:32]] = 1

    def acc(scores):
        return float(np.mean(np.argmax(scores, axis=1) == y))

    S = B @ T.T
    for _ in range(300):
        best_a, best_flip = acc(S), None
        for d in range(10):
            for i in range(121):
                S2 = S.copy()
                S2[:, d] += (1 - 2 * T[d, i]) * B[:, i]
                a = acc(S2)
                if a > best_a:
                    best_a, best_flip = a, (d, i)
        if best_flip is None:
            break
        d, i = best_flip
        S[:, d] += (1 - 2 * T[d, i]) * B[:, i]
        T[d, i] ^= 1
    return [[int(v) for v in row] for row in T], acc(S)


def main():
    out_dir = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")
    os.makedirs(out_dir, exist_ok=True)

    images, labels = make_images()
    with open(os.path.join(out_dir, "test-images-idx3-ubyte"), "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        for img in images:
            f.write(bytes(px for row in img for px in row))
    with open(os.path.join(out_dir, "test-labels-idx1-ubyte"), "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))

    bits = [pool_bits(img) for img in images]
    templates, accuracy = train_templates(bits, labels)
    with open(os.path.join(out_dir, "model_weights.csv"), "w") as f:
        for row in templates:
            f.write(",".join(str(b) for b in row) + "\n")
    with open(os.path.join(out_dir, "model_thresholds.txt"), "w") as f:
        f.write("%d\n" % THRESHOLD)

    print("template popcounts:", [sum(t) for t in templates])
    print("template-match accuracy: %.4f" % accuracy)
    print("wrote %d images to %s" % (len(images), out_dir))


if __name__ == "__main__":
    main()
