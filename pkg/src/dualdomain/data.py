"""Dataset ingestion, the synthetic frequency-separable stand-in, splits,
and batch iteration.

Real data is a directory tree with one subdirectory per diagnostic class
holding 8-bit grayscale PNG/JPEG images. The synthetic generator produces
the same four-class layout at desk scale: class k images are mixtures of 2D
sinusoids whose radial frequencies fall in the k-th of four disjoint bands,
so a band-energy rule separates the classes perfectly and a trained model
has signal in both the spatial and the frequency domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .numerics import RngStream, derive_seed
from .spectral import ChannelStats, assemble_channels, fft2, fftshift, signed_log

__all__ = [
    "DiagnosticClass",
    "Sample",
    "Dataset",
    "IngestionError",
    "SplitError",
    "load_dataset",
    "synth_dataset",
    "split",
    "batches",
    "save_png_tree",
]

# Guard for the lazily built experimental-channel cache (float64 pixels).
_CACHE_PIXEL_LIMIT = 2**25


class IngestionError(ValueError):
    pass


class SplitError(ValueError):
    pass


class DiagnosticClass(IntEnum):
    MildDemented = 0
    ModerateDemented = 1
    NonDemented = 2
    VeryMildDemented = 3


def _canon(name: str) -> str:
    return "".join(ch for ch in name.lower() if ch.isalnum())


_CANON_TO_CLASS = {_canon(c.name): c for c in DiagnosticClass}


@dataclass(frozen=True)
class Sample:
    id: str
    image: np.ndarray  # (H, W) float64 in [0, 1]
    label: DiagnosticClass


@dataclass
class Dataset:
    """Ordered, immutable-by-convention sample collection with split tags."""

    images: np.ndarray  # (N, H, W) float64 in [0, 1]
    labels: np.ndarray  # (N,) int64
    ids: tuple[str, ...]
    split_tags: np.ndarray  # (N,) unicode, each "train" or "validation"
    channel_stats: ChannelStats | None = None
    _stack_cache: np.ndarray | None = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        n = self.images.shape[0]
        if not (len(self.ids) == self.labels.shape[0] == self.split_tags.shape[0] == n):
            raise ValueError("images/labels/ids/split_tags lengths disagree")
        if len(set(self.ids)) != n:
            raise ValueError("sample ids are not unique")

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def image_size(self) -> int:
        return self.images.shape[1]

    def sample(self, i: int) -> Sample:
        return Sample(self.ids[i], self.images[i], DiagnosticClass(int(self.labels[i])))

    def indices(self, split_tag: str) -> np.ndarray:
        if split_tag not in ("train", "validation"):
            raise ValueError(f"unknown split tag {split_tag!r}")
        return np.flatnonzero(self.split_tags == split_tag)


def _decode_image(path: Path, image_size: int) -> np.ndarray:
    try:
        with Image.open(path) as im:
            gray = im.convert("L")
            if gray.size != (image_size, image_size):
                gray = gray.resize((image_size, image_size), Image.BILINEAR)
            arr = np.asarray(gray, dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise IngestionError(f"cannot decode image file {path}: {exc}") from exc
    return arr


def load_dataset(root: str | Path, image_size: int) -> Dataset:
    """Load the four-class directory tree, resizing every image to
    image_size x image_size and scaling pixels to [0, 1].

    The root must contain exactly the four class subdirectories (matched
    case-insensitively, ignoring separators). Ordering is lexicographic by
    path, so a given tree always loads identically.
    """
    root = Path(root)
    if not root.is_dir():
        raise IngestionError(f"dataset root {root} is not a directory")
    if image_size < 1 or (image_size & (image_size - 1)) != 0:
        raise ValueError(f"image_size must be a power of two, got {image_size}")

    dirs = sorted(p for p in root.iterdir() if p.is_dir())
    by_class: dict[DiagnosticClass, Path] = {}
    for d in dirs:
        cls = _CANON_TO_CLASS.get(_canon(d.name))
        if cls is None:
            raise IngestionError(f"unknown class subdirectory {d.name!r} under {root}")
        if cls in by_class:
            raise IngestionError(f"duplicate directory for class {cls.name} under {root}")
        by_class[cls] = d
    missing = [c.name for c in DiagnosticClass if c not in by_class]
    if missing:
        raise IngestionError(f"missing class subdirectories under {root}: {missing}")

    images, labels, ids = [], [], []
    for cls in DiagnosticClass:
        class_dir = by_class[cls]
        files = sorted(
            p
            for p in class_dir.iterdir()
            if p.is_file() and p.suffix.lower() in (".png", ".jpg", ".jpeg")
        )
        if not files:
            raise IngestionError(f"class directory {class_dir} holds no images")
        for p in files:
            images.append(_decode_image(p, image_size))
            labels.append(int(cls))
            ids.append(f"{class_dir.name}/{p.name}")

    return Dataset(
        images=np.stack(images),
        labels=np.asarray(labels, dtype=np.int64),
        ids=tuple(ids),
        split_tags=np.full(len(ids), "train", dtype="<U10"),
    )


def _band_lattice(size: int, k: int) -> list[tuple[int, int]]:
    """Integer frequency pairs whose wrap-around radius from DC lies in band
    k*size/16 < r <= (k+1)*size/16."""
    lo = k * size / 16.0
    hi = (k + 1) * size / 16.0
    points = []
    for u in range(size):
        for v in range(size):
            ru = min(u, size - u)
            rv = min(v, size - v)
            r = math.hypot(ru, rv)
            if lo < r <= hi:
                points.append((u, v))
    return points


def synth_dataset(n: int, size: int, noise_sigma: float, seed: int) -> Dataset:
    """Generate n/4 samples per class of band-limited sinusoid mixtures.

    Class k draws three sinusoids with integer frequency pairs from band
    B_k, random phases and amplitudes, on a 0.5 gray background, plus
    Gaussian pixel noise of std noise_sigma, clamped to [0, 1]. Fully
    deterministic given the arguments.
    """
    if n % 4 != 0:
        raise ValueError(f"n must be divisible by 4, got {n}")
    if size < 16 or (size & (size - 1)) != 0:
        raise ValueError(f"size must be a power of two >= 16, got {size}")

    per_class = n // 4
    coords = np.arange(size, dtype=np.float64)
    mm, nn = np.meshgrid(coords, coords, indexing="ij")

    images, labels, ids = [], [], []
    for cls in DiagnosticClass:
        lattice = _band_lattice(size, int(cls))
        rng = RngStream(derive_seed(seed, int(cls)))
        for i in range(per_class):
            img = np.full((size, size), 0.5)
            for _ in range(3):
                u, v = lattice[rng.randint(0, len(lattice))]
                phase = 2.0 * np.pi * rng.uniform()
                amp = 0.08 + 0.08 * rng.uniform()
                img += amp * np.cos(2.0 * np.pi * (u * mm + v * nn) / size + phase)
            if noise_sigma > 0:
                img += noise_sigma * rng.normals(size * size).reshape(size, size)
            images.append(np.clip(img, 0.0, 1.0))
            labels.append(int(cls))
            ids.append(f"{cls.name}/syn_{i:05d}")

    return Dataset(
        images=np.stack(images),
        labels=np.asarray(labels, dtype=np.int64),
        ids=tuple(ids),
        split_tags=np.full(n, "train", dtype="<U10"),
    )


def _compute_channel_stats(images: np.ndarray, indices: np.ndarray) -> ChannelStats:
    """Population mean/std of the signed-log shifted k-space planes over the
    given samples, accumulated in a fixed order."""
    sums = np.zeros(2)
    sumsq = np.zeros(2)
    count = 0
    for i in indices:
        planes = fft2(images[i])
        re = signed_log(fftshift(planes.real))
        im = signed_log(fftshift(planes.imag))
        sums += (re.sum(), im.sum())
        sumsq += ((re * re).sum(), (im * im).sum())
        count += re.size
    mean = sums / count
    var = np.maximum(sumsq / count - mean * mean, 0.0)
    std = np.sqrt(var)
    std[std < 1e-12] = 1.0
    return ChannelStats(mean=mean, std=std)


def split(dataset: Dataset, val_fraction: float, seed: int) -> Dataset:
    """Stratified train/validation split: floor(count * val_fraction)
    validation samples per class, chosen by seeded shuffle. Channel
    statistics are recomputed from the resulting train split only."""
    if not 0.0 < val_fraction < 1.0:
        raise ValueError(f"val_fraction must lie in (0, 1), got {val_fraction}")
    tags = np.full(len(dataset), "train", dtype="<U10")
    for cls in DiagnosticClass:
        class_idx = np.flatnonzero(dataset.labels == int(cls))
        if class_idx.size < 2:
            raise SplitError(
                f"class {cls.name} has {class_idx.size} samples; need at least 2 to split"
            )
        n_val = int(class_idx.size * val_fraction)
        perm = RngStream(derive_seed(seed, int(cls))).permutation(class_idx.size)
        tags[class_idx[perm[:n_val]]] = "validation"
    stats = _compute_channel_stats(dataset.images, np.flatnonzero(tags == "train"))
    return Dataset(
        images=dataset.images,
        labels=dataset.labels,
        ids=dataset.ids,
        split_tags=tags,
        channel_stats=stats,
    )


def _experimental_stack(dataset: Dataset, i: int) -> np.ndarray:
    return assemble_channels(
        dataset.images[i], "experimental", dataset.channel_stats
    ).channels


def _stack_cache(dataset: Dataset) -> np.ndarray | None:
    if dataset.images.size > _CACHE_PIXEL_LIMIT:
        return None
    if dataset._stack_cache is None:
        n, h, w = dataset.images.shape
        cache = np.empty((n, 3, h, w))
        for i in range(n):
            cache[i] = _experimental_stack(dataset, i)
        dataset._stack_cache = cache
    return dataset._stack_cache


def batches(dataset: Dataset, split_tag: str, batch_size: int, mode: str, seed: int):
    """Yield (stack, labels) pairs covering the split exactly once.

    Train order is a seeded shuffle (pass a per-epoch seed); validation
    order is fixed. The last partial batch is kept.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    idx = dataset.indices(split_tag)
    if idx.size == 0:
        raise ValueError(f"split {split_tag!r} is empty")
    if split_tag == "train":
        idx = idx[RngStream(seed).permutation(idx.size)]

    cache = _stack_cache(dataset) if mode == "experimental" else None
    for start in range(0, idx.size, batch_size):
        chunk = idx[start : start + batch_size]
        if mode == "control":
            x = dataset.images[chunk][:, np.newaxis, :, :].copy()
        elif cache is not None:
            x = cache[chunk].copy()
        else:
            x = np.stack([_experimental_stack(dataset, i) for i in chunk])
        yield x, dataset.labels[chunk].copy()


def save_png_tree(dataset: Dataset, out_root: str | Path) -> list[Path]:
    """Export samples as 8-bit grayscale PNGs in the class-directory layout.

    The written tree round-trips through load_dataset (up to 8-bit pixel
    quantization). Returns the written paths."""
    out_root = Path(out_root)
    written = []
    for i in range(len(dataset)):
        cls = DiagnosticClass(int(dataset.labels[i]))
        class_dir = out_root / cls.name
        class_dir.mkdir(parents=True, exist_ok=True)
        basename = dataset.ids[i].rsplit("/", 1)[-1]
        if not basename.lower().endswith(".png"):
            basename += ".png"
        path = class_dir / basename
        pixels = np.clip(np.rint(dataset.images[i] * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(pixels, mode="L").save(path, format="PNG")
        written.append(path)
    return written
