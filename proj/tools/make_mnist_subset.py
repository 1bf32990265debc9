#!/usr/bin/env python3
# Copyright 2026 The progbnn Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Builds a desk-scale MNIST subset in IDX format.

The npm package `mnist` (MIT) bundles 10,000 real MNIST digits as JSON arrays
of pixel/255 values rounded to three decimals. Multiplying by 255 and rounding
recovers the original bytes exactly (0.001 * 255 < 0.5).

Each class is shuffled with a fixed seed and split 80/20 into train/test; the
resulting files follow the usual MNIST naming so `--data-dir` can point at
either this subset or the full dataset.

Usage: make_mnist_subset.py OUT_DIR [--package mnist-1.1.0.tgz]
"""

import argparse
import json
import random
import struct
import subprocess
import tarfile
import tempfile
from pathlib import Path

SIDE = 28
PIXELS = SIDE * SIDE


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), SIDE, SIDE))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def load_digits(package_dir):
    per_class = {}
    for digit in range(10):
        raw = json.loads((package_dir / "src" / "digits" / f"{digit}.json").read_text())["data"]
        count = len(raw) // PIXELS
        per_class[digit] = [
            [int(round(v * 255.0)) for v in raw[i * PIXELS:(i + 1) * PIXELS]] for i in range(count)
        ]
    return per_class


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--package", type=Path, help="pre-downloaded mnist npm tarball")
    parser.add_argument("--train-fraction", type=float, default=0.8)
    parser.add_argument("--seed", type=int, default=20200)
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        tarball = args.package
        if tarball is None:
            subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=tmp, check=True, stdout=subprocess.DEVNULL)
            tarball = next(tmp.glob("mnist-*.tgz"))
        with tarfile.open(tarball) as tar:
            tar.extractall(tmp)
        per_class = load_digits(tmp / "package")

    rng = random.Random(args.seed)
    train, test = [], []
    for digit in range(10):
        samples = per_class[digit]
        rng.shuffle(samples)
        cut = int(round(len(samples) * args.train_fraction))
        train += [(img, digit) for img in samples[:cut]]
        test += [(img, digit) for img in samples[cut:]]
    rng.shuffle(train)
    rng.shuffle(test)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    for prefix, rows in (("train", train), ("t10k", test)):
        write_images(args.out_dir / f"{prefix}-images-idx3-ubyte", [img for img, _ in rows])
        write_labels(args.out_dir / f"{prefix}-labels-idx1-ubyte", [lab for _, lab in rows])
        print(f"{prefix}: {len(rows)} samples")


if __name__ == "__main__":
    main()
