#!/usr/bin/env python3
"""Build the IDX fixture files under data/ from the 5000-digit MNIST sample
bundled with the mlxtend wheel (500 images per class).

Usage:
    pip download --no-deps -d /tmp/wheels mlxtend
    python3 scripts/make_mnist_fixture.py /tmp/wheels/mlxtend-*.whl data/

The digits are shuffled with a fixed seed; the first 4000 form the training
split and the remaining 1000 the frozen evaluation fixture.
"""
import gzip
import io
import struct
import sys
import zipfile
from pathlib import Path

import numpy as np

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"
SEED = 20240607
N_TRAIN = 4000


def write_images(path, images):
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    wheel, out = Path(sys.argv[1]), Path(sys.argv[2])
    raw = zipfile.ZipFile(wheel).read(MEMBER)
    table = np.loadtxt(io.BytesIO(gzip.decompress(raw)), delimiter=",")
    pixels = table[:, :784].reshape(-1, 28, 28)
    labels = table[:, 784]
    order = np.random.default_rng(SEED).permutation(len(labels))
    pixels, labels = pixels[order], labels[order]
    out.mkdir(parents=True, exist_ok=True)
    write_images(out / "train-images-idx3-ubyte", pixels[:N_TRAIN])
    write_labels(out / "train-labels-idx1-ubyte", labels[:N_TRAIN])
    write_images(out / "fixture-images-idx3-ubyte", pixels[N_TRAIN:])
    write_labels(out / "fixture-labels-idx1-ubyte", labels[N_TRAIN:])


if __name__ == "__main__":
    main()
