#!/usr/bin/env python3
"""Builds the MNIST subset under data/mnist/ from the `mnist` npm package.

The package ships about 1000 images per digit as JSON arrays of byte/255
values rounded to three decimals; round(v * 255) recovers the original
bytes exactly. Images are split by a seeded shuffle into train and test
sets and written as gzipped IDX files.

    python3 tools/fetch_mnist_subset.py [--package-dir DIR] [--out data/mnist]
"""

import argparse
import gzip
import json
import pathlib
import struct
import subprocess
import tarfile
import tempfile

import numpy as np

PACKAGE = "mnist@1.1.0"
PIXELS = 28 * 28


def fetch_package(workdir: pathlib.Path) -> pathlib.Path:
    out = subprocess.run(["npm", "pack", PACKAGE, "--silent"], cwd=workdir, check=True,
                         capture_output=True, text=True).stdout.strip().splitlines()[-1]
    with tarfile.open(workdir / out) as tar:
        tar.extractall(workdir, filter="data")
    return workdir / "package"


def load_digits(package_dir: pathlib.Path):
    images, labels = [], []
    for digit in range(10):
        values = json.loads((package_dir / "src" / "digits" / f"{digit}.json").read_text())["data"]
        if len(values) % PIXELS:
            raise SystemExit(f"digit {digit}: {len(values)} values is not a multiple of {PIXELS}")
        raw = np.rint(np.asarray(values, dtype=np.float64) * 255.0)
        if raw.min() < 0 or raw.max() > 255:
            raise SystemExit(f"digit {digit}: values outside [0, 1]")
        block = raw.astype(np.uint8).reshape(-1, PIXELS)
        images.append(block)
        labels.append(np.full(len(block), digit, dtype=np.uint8))
    return np.concatenate(images), np.concatenate(labels)


def write_idx(path: pathlib.Path, array: np.ndarray) -> None:
    header = struct.pack(">I", 0x0800 | array.ndim) + b"".join(struct.pack(">I", d) for d in array.shape)
    # mtime=0 keeps the archives byte-identical across runs.
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0, filename="") as gz:
        gz.write(header + array.astype(np.uint8).tobytes())


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--package-dir", type=pathlib.Path, help="already extracted npm package")
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("data/mnist"))
    ap.add_argument("--train", type=int, default=8000, help="training images; the rest form the test set")
    ap.add_argument("--seed", type=int, default=20190101)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        pkg = args.package_dir or fetch_package(pathlib.Path(tmp))
        images, labels = load_digits(pkg)

    order = np.random.default_rng(args.seed).permutation(len(labels))
    train, test = order[: args.train], order[args.train:]
    args.out.mkdir(parents=True, exist_ok=True)
    for split, idx in (("train", train), ("test", test)):
        write_idx(args.out / f"{split}-images-idx3-ubyte.gz", images[idx].reshape(-1, 28, 28))
        write_idx(args.out / f"{split}-labels-idx1-ubyte.gz", labels[idx])
        print(f"{split}: {len(idx)} images, class counts {np.bincount(labels[idx], minlength=10).tolist()}")


if __name__ == "__main__":
    main()
