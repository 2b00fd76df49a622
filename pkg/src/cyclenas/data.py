"""Unpaired image data: folder loading, synthetic desk-scale tasks, sampling.

Images are (3, H, W) float64 arrays in [-1, 1].  Both sides of a dataset share
one shape but may differ in count (imbalance is preserved, never truncated).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .seeding import rng_for

SYNTHETIC_KINDS = ("color_swap", "texture_asym")


@dataclass
class UnpairedDataset:
    side_a: list[np.ndarray]
    side_b: list[np.ndarray]
    name: str = "unpaired"

    def __post_init__(self):
        if not self.side_a or not self.side_b:
            raise ValueError("both sides of an unpaired dataset must be non-empty")
        shape = self.side_a[0].shape
        for side, images in (("A", self.side_a), ("B", self.side_b)):
            for i, img in enumerate(images):
                if img.shape != shape:
                    raise ValueError(
                        f"side {side} image {i} has shape {img.shape}, expected {shape}")

    @property
    def n_a(self) -> int:
        return len(self.side_a)

    @property
    def n_b(self) -> int:
        return len(self.side_b)

    @property
    def image_shape(self) -> tuple:
        return self.side_a[0].shape


@dataclass(frozen=True)
class SyntheticTask:
    kind: str
    image_size: int
    n_a: int
    n_b: int
    seed: int

    def __post_init__(self):
        if self.kind not in SYNTHETIC_KINDS:
            raise ValueError(f"unknown synthetic task '{self.kind}'")
        if self.image_size < 8:
            raise ValueError(f"image_size must be >= 8, got {self.image_size}")
        if self.n_a < 2 or self.n_b < 2:
            raise ValueError("each side needs at least 2 images")


# ---------------------------------------------------------------------------
# pixel mapping


def normalize_pixels(u8: np.ndarray) -> np.ndarray:
    """Map [0, 255] linearly onto [-1, 1]."""
    return u8.astype(np.float64) * (2.0 / 255.0) - 1.0


def denormalize_pixels(x: np.ndarray) -> np.ndarray:
    u8 = np.round((np.clip(x, -1.0, 1.0) + 1.0) * (255.0 / 2.0))
    return u8.astype(np.uint8)


def quantize(x: np.ndarray) -> np.ndarray:
    """Snap values onto the 8-bit grid so PNG round-trips are lossless."""
    return normalize_pixels(denormalize_pixels(x))


# ---------------------------------------------------------------------------
# PNG folders


def load_png(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"))
    except Exception as exc:
        raise ValueError(f"cannot decode image '{path}': {exc}") from None
    return normalize_pixels(arr.transpose(2, 0, 1))


def save_png(path: Path, img: np.ndarray) -> None:
    arr = denormalize_pixels(img).transpose(1, 2, 0)
    Image.fromarray(arr, "RGB").save(path, format="PNG")


def _load_side(directory: Path, side: str) -> list[np.ndarray]:
    directory = Path(directory)
    if not directory.is_dir():
        raise ValueError(f"side {side}: '{directory}' is not a directory")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() == ".png")
    if not files:
        raise ValueError(f"side {side}: no PNG files in '{directory}'")
    images = [load_png(p) for p in files]
    shape = images[0].shape
    for p, img in zip(files, images):
        if img.shape != shape:
            raise ValueError(
                f"side {side}: '{p}' has dimensions {img.shape[1:]} but "
                f"'{files[0]}' has {shape[1:]}")
    return images


def load_image_folder(directory: Path, label: str = "X") -> list[np.ndarray]:
    """All PNGs of one folder, lexicographic, shape-checked."""
    return _load_side(Path(directory), label)


def load_unpaired(dir_a: Path, dir_b: Path, name: str = "unpaired") -> UnpairedDataset:
    """Load two PNG folders in deterministic lexicographic order."""
    side_a = _load_side(Path(dir_a), "A")
    side_b = _load_side(Path(dir_b), "B")
    if side_a[0].shape != side_b[0].shape:
        raise ValueError(
            f"sides disagree on image shape: {side_a[0].shape} vs {side_b[0].shape}")
    return UnpairedDataset(side_a=side_a, side_b=side_b, name=name)


def load_dataset_root(root: Path, name: str | None = None) -> UnpairedDataset:
    """Load the conventional <root>/trainA, <root>/trainB layout."""
    root = Path(root)
    return load_unpaired(root / "trainA", root / "trainB",
                         name=name or root.name)


def write_dataset(ds: UnpairedDataset, root: Path) -> None:
    root = Path(root)
    for sub, images in (("trainA", ds.side_a), ("trainB", ds.side_b)):
        directory = root / sub
        directory.mkdir(parents=True, exist_ok=True)
        for i, img in enumerate(images):
            save_png(directory / f"{i:04d}.png", img)


# ---------------------------------------------------------------------------
# synthetic tasks
#
# color_swap: the two sides carry the same random-ellipse shape family but
# opposite dominant tints (red vs blue), so translation is a color mapping.
# texture_asym: like color_swap, but side B additionally carries alternating
# high-frequency stripes; removing detail (B->A) is easier than synthesizing
# it (A->B), which makes the directions unequally hard.


def _shape_mask(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    mask = np.zeros((size, size), dtype=bool)
    n_minor = int(rng.integers(0, 3))
    specs = [(rng.uniform(0.35, 0.65), rng.uniform(0.35, 0.65),
              rng.uniform(0.30, 0.42), rng.uniform(0.30, 0.42))]
    specs += [(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8),
               rng.uniform(0.08, 0.15), rng.uniform(0.08, 0.15))
              for _ in range(n_minor)]
    for cx, cy, rx, ry in specs:
        mask |= (((xx - cx * size) / (rx * size)) ** 2
                 + ((yy - cy * size) / (ry * size)) ** 2) <= 1.0
    return mask


def _tinted_image(rng: np.random.Generator, size: int, dominant: int) -> np.ndarray:
    img = np.full((3, size, size), -0.3)
    mask = _shape_mask(rng, size)
    for ch in range(3):
        img[ch][mask] = 0.85 if ch == dominant else -0.55
    img += rng.normal(0.0, 0.05, img.shape)
    return img


def _add_stripes(rng: np.random.Generator, img: np.ndarray) -> np.ndarray:
    size = img.shape[-1]
    offset = int(rng.integers(0, 2))
    axis = int(rng.integers(0, 2))
    coords = np.arange(size)
    stripe = np.where((coords + offset) % 2 == 0, 0.3, -0.3)
    pattern = stripe[None, :] if axis == 0 else stripe[:, None]
    return img + np.broadcast_to(pattern, img.shape[1:])


def generate_synthetic(task: SyntheticTask) -> UnpairedDataset:
    """Deterministically generate a two-sided task from (kind, sizes, seed)."""
    rng_a = rng_for(task.seed, "synthetic", task.kind, "a")
    rng_b = rng_for(task.seed, "synthetic", task.kind, "b")
    side_a = [quantize(np.clip(_tinted_image(rng_a, task.image_size, dominant=0), -1, 1))
              for _ in range(task.n_a)]
    side_b = []
    for _ in range(task.n_b):
        img = _tinted_image(rng_b, task.image_size, dominant=2)
        if task.kind == "texture_asym":
            img = _add_stripes(rng_b, img)
        side_b.append(quantize(np.clip(img, -1, 1)))
    return UnpairedDataset(side_a=side_a, side_b=side_b,
                           name=f"{task.kind}-{task.image_size}-{task.seed}")


# ---------------------------------------------------------------------------
# sampling


def epoch_permutation(seed: int, label: str, epoch: int, n: int) -> np.ndarray:
    """Seed-deterministic shuffle for one side and epoch."""
    return rng_for(seed, "shuffle", label, epoch).permutation(n)


def sample_pair(dataset: UnpairedDataset, perms: tuple[np.ndarray, np.ndarray],
                iteration: int) -> tuple[np.ndarray, np.ndarray]:
    """One image per side; the smaller side cycles through its permutation."""
    perm_a, perm_b = perms
    ia = int(perm_a[iteration % len(perm_a)])
    ib = int(perm_b[iteration % len(perm_b)])
    return dataset.side_a[ia], dataset.side_b[ib]


class SideStream:
    """Per-epoch shuffled index stream over a fixed subset of one side."""

    def __init__(self, indices: list[int], seed: int, label: str):
        if not indices:
            raise ValueError(f"stream '{label}' has no indices")
        self.indices = list(indices)
        self.seed = seed
        self.label = label
        self._epoch = None
        self._perm = None

    def index_at(self, epoch: int, iteration: int) -> int:
        if epoch != self._epoch:
            self._epoch = epoch
            self._perm = epoch_permutation(self.seed, self.label, epoch, len(self.indices))
        return self.indices[int(self._perm[iteration % len(self.indices)])]
