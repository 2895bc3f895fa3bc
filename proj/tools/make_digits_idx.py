#!/usr/bin/env python3
"""Build the bundled 28x28 handwritten-digit IDX files under data/.

Source material is sklearn's offline `load_digits` corpus (1797 real 8x8
handwritten digits from the UCI collection). Base images are split into
disjoint train/test pools per class, bilinearly upsampled to 28x28, and
augmented with integer shifts, intensity jitter, and pixel noise to 6000
train + 1000 test samples. Output follows the MNIST IDX byte layout, so the
files are drop-in replaceable with the real MNIST pair.

Deterministic: fixed seed, no network access.
"""

import struct
import sys
from pathlib import Path

import numpy as np
from scipy.ndimage import zoom
from sklearn.datasets import load_digits

SEED = 20240817
TRAIN_PER_CLASS = 600
TEST_PER_CLASS = 100
SIZE = 28


def write_idx_images(path: Path, images: np.ndarray) -> None:
    assert images.dtype == np.uint8 and images.ndim == 3
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, images.shape[0], images.shape[1], images.shape[2]))
        fh.write(images.tobytes())


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    assert labels.dtype == np.uint8 and labels.ndim == 1
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, labels.shape[0]))
        fh.write(labels.tobytes())


def augment(base28: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    dy, dx = rng.integers(-3, 4, size=2)
    img = np.roll(np.roll(base28, dy, axis=0), dx, axis=1)
    if dy > 0:
        img[:dy, :] = 0
    elif dy < 0:
        img[dy:, :] = 0
    if dx > 0:
        img[:, :dx] = 0
    elif dx < 0:
        img[:, dx:] = 0
    img = img * rng.uniform(0.7, 1.3)
    img = img + rng.normal(0.0, 18.0, size=img.shape)
    return np.clip(img, 0.0, 255.0).astype(np.uint8)


def build_pool(bases: list[np.ndarray], count: int, rng: np.random.Generator) -> list[np.ndarray]:
    out = []
    for i in range(count):
        base = bases[int(rng.integers(0, len(bases)))]
        out.append(augment(base, rng))
    return out


def main() -> int:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data"
    out_dir.mkdir(parents=True, exist_ok=True)

    digits = load_digits()
    images8 = digits.images  # (1797, 8, 8), float 0..16
    labels = digits.target

    rng = np.random.default_rng(SEED)
    train_images, train_labels, test_images, test_labels = [], [], [], []
    for cls in range(10):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        n_test_base = max(1, len(idx) // 5)
        test_base_idx, train_base_idx = idx[:n_test_base], idx[n_test_base:]

        def to28(i: int) -> np.ndarray:
            img = images8[i] * (255.0 / 16.0)
            return zoom(img, SIZE / 8.0, order=1)

        train_bases = [to28(i) for i in train_base_idx]
        test_bases = [to28(i) for i in test_base_idx]

        train_images += build_pool(train_bases, TRAIN_PER_CLASS, rng)
        train_labels += [cls] * TRAIN_PER_CLASS
        test_images += build_pool(test_bases, TEST_PER_CLASS, rng)
        test_labels += [cls] * TEST_PER_CLASS

    # interleave classes so prefixes of the file are class-balanced
    def interleave(images, labs, per_class):
        order = []
        for i in range(per_class):
            for cls in range(10):
                order.append(cls * per_class + i)
        return (np.stack([images[i] for i in order]), np.array([labs[i] for i in order], dtype=np.uint8))

    tr_x, tr_y = interleave(train_images, train_labels, TRAIN_PER_CLASS)
    te_x, te_y = interleave(test_images, test_labels, TEST_PER_CLASS)

    write_idx_images(out_dir / "digits-train-images-idx3-ubyte", tr_x)
    write_idx_labels(out_dir / "digits-train-labels-idx1-ubyte", tr_y)
    write_idx_images(out_dir / "digits-test-images-idx3-ubyte", te_x)
    write_idx_labels(out_dir / "digits-test-labels-idx1-ubyte", te_y)
    print(f"wrote {tr_x.shape[0]} train / {te_x.shape[0]} test images to {out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
