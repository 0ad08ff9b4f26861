"""Corpus ingestion (ISIC-style layout) and synthetic lesion phantoms."""
from __future__ import annotations

import csv
import fnmatch
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .imgcore import quantize

LABELS = ("benign", "malignant")
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}
DEFAULT_MASK_PATTERN = "*_Segmentation.png"


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusEntry:
    id: str
    image_path: Path
    mask_path: Path | None = None
    label: str | None = None


@dataclass(frozen=True)
class Corpus:
    entries: tuple[CorpusEntry, ...] = ()

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def ids(self):
        return [e.id for e in self.entries]


def read_labels(path) -> dict[str, str]:
    """Parse an ``id,label`` CSV. Errors name the offending line."""
    path = Path(path)
    labels: dict[str, str] = {}
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise CorpusError(f"cannot read labels file {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["id", "label"]:
            raise CorpusError(f"{path}:1: expected header 'id,label'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise CorpusError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            sample_id, label = row[0].strip(), row[1].strip().lower()
            if label not in LABELS:
                raise CorpusError(f"{path}:{lineno}: label must be benign or malignant, got {row[1]!r}")
            if sample_id in labels:
                raise CorpusError(f"{path}:{lineno}: duplicate id {sample_id!r}")
            labels[sample_id] = label
    return labels


def _mask_id(name: str, pattern: str) -> str:
    # "*_Segmentation.png" -> strip the literal suffix after the wildcard
    suffix = pattern.split("*", 1)[-1]
    return name[: len(name) - len(suffix)]


def load_corpus(root, labels=None, mask_pattern: str = DEFAULT_MASK_PATTERN) -> Corpus:
    """Index images, expert masks and labels under ``root``, joined by id.

    Image ids are file stems; mask ids drop the mask pattern's suffix
    (``ISIC_0000000_Segmentation.png`` -> ``ISIC_0000000``). Files are only
    indexed here, not decoded. Entries come back sorted by id.
    """
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"corpus root {root} is not a directory")

    images: dict[str, Path] = {}
    masks: dict[str, Path] = {}
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        if fnmatch.fnmatch(path.name, mask_pattern):
            mid = _mask_id(path.name, mask_pattern)
            if mid in masks:
                raise CorpusError(f"duplicate mask id {mid!r}")
            masks[mid] = path
        elif path.suffix.lower() in IMAGE_SUFFIXES:
            if path.stem in images:
                raise CorpusError(f"duplicate image id {path.stem!r}")
            images[path.stem] = path

    label_map = read_labels(labels) if labels is not None else {}

    orphan_masks = sorted(set(masks) - set(images))
    orphan_labels = sorted(set(label_map) - set(images))
    missing_masks = sorted(set(images) - set(masks))
    if orphan_masks:
        warnings.warn(f"masks without images: {', '.join(orphan_masks)}", stacklevel=2)
    if orphan_labels:
        warnings.warn(f"labels without images: {', '.join(orphan_labels)}", stacklevel=2)
    if missing_masks and images:
        warnings.warn(f"images without expert masks: {', '.join(missing_masks)}", stacklevel=2)

    entries = tuple(
        CorpusEntry(i, images[i], masks.get(i), label_map.get(i)) for i in sorted(images)
    )
    return Corpus(entries)


def read_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def read_mask(path) -> np.ndarray:
    """Any nonzero pixel is lesion."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) > 0


def write_image(path, img) -> None:
    Image.fromarray(np.asarray(img, dtype=np.uint8)).save(path)


def write_mask(path, mask) -> None:
    Image.fromarray(np.asarray(mask, dtype=np.uint8) * 255).save(path)


# --------------------------------------------------------------------------
# phantoms

PHANTOM_KINDS = ("disk", "halo_disk", "hairy_disk", "salt_pepper_disk", "bubble_disk",
                 "two_tone", "irregular")

SKIN = (230, 200, 220)
LESION = (110, 70, 40)
HALO = (230, 200, 180)


@dataclass(frozen=True)
class Phantom:
    """Parameters of a synthetic dermoscopy-like image with a known lesion mask.

    ``irregular`` produces a variegated, lobed lesion (labelled malignant);
    every other kind is a benign-looking uniform lesion with one artifact.
    """
    kind: str = "disk"
    height: int = 110
    width: int = 110
    radius: float = 20.0
    center: tuple[float, float] | None = None
    seed: int = 0
    noise_fraction: float = 0.05
    noise_sigma: float = 0.0
    halo_width: float = 10.0
    halo_texture: float = 20.0
    n_hairs: int = 3
    vignette: float = 0.0
    lesion_color: tuple[int, int, int] = LESION
    skin_color: tuple[int, int, int] = SKIN
    extra: dict = field(default_factory=dict)


def _grid(p: Phantom):
    rr, cc = np.mgrid[0:p.height, 0:p.width].astype(np.float64)
    cy, cx = p.center if p.center is not None else ((p.height - 1) / 2, (p.width - 1) / 2)
    return rr, cc, cy, cx


def _check_inside(p: Phantom, reach: float):
    _, _, cy, cx = _grid(p)
    if (cy - reach < 0 or cx - reach < 0 or cy + reach > p.height - 1
            or cx + reach > p.width - 1):
        raise ValueError(f"phantom geometry (centre {(cy, cx)}, reach {reach}) leaves the canvas")


def _paint(img, mask, color):
    img[mask] = color


def _draw_hair(img, rng, thickness=1):
    h, w = img.shape[:2]
    # a gently curved dark line crossing the canvas
    t = np.linspace(0.0, 1.0, 4 * max(h, w))
    side = rng.integers(2)
    a, b = rng.uniform(0.1, 0.9, size=2)
    bend = rng.uniform(-0.15, 0.15)
    if side == 0:
        rows = (a + (b - a) * t + bend * np.sin(np.pi * t)) * (h - 1)
        cols = t * (w - 1)
    else:
        rows = t * (h - 1)
        cols = (a + (b - a) * t + bend * np.sin(np.pi * t)) * (w - 1)
    r = np.clip(np.rint(rows).astype(int), 0, h - 1)
    c = np.clip(np.rint(cols).astype(int), 0, w - 1)
    shade = rng.integers(20, 50)
    for dr in range(thickness):
        img[np.clip(r + dr, 0, h - 1), c] = (shade, shade, shade)


def make_phantom(p: Phantom):
    """Render a phantom. Returns ``(rgb uint8 image, true mask, label)``."""
    if p.kind not in PHANTOM_KINDS:
        raise ValueError(f"unknown phantom kind {p.kind!r}")
    if p.height < 1 or p.width < 1:
        raise ValueError("phantom canvas must be at least 1x1")
    rng = np.random.default_rng(p.seed)
    rr, cc, cy, cx = _grid(p)
    dist = np.hypot(rr - cy, cc - cx)
    img = np.empty((p.height, p.width, 3), dtype=np.float64)
    img[:] = p.skin_color
    label = "benign"

    if p.kind == "two_tone":
        truth = cc < p.width / 2
        _paint(img, truth, p.lesion_color)
    elif p.kind == "irregular":
        _check_inside(p, p.radius * 1.45)
        theta = np.arctan2(rr - cy, cc - cx)
        k = rng.integers(3, 6)
        phase = rng.uniform(0, 2 * np.pi, size=2)
        boundary = p.radius * (1 + 0.3 * np.sin(k * theta + phase[0])
                               + 0.12 * np.sin((2 * k + 1) * theta + phase[1]))
        truth = dist <= boundary
        # variegation: several colour blotches inside the lesion
        palette = np.array([(60, 35, 25), (150, 90, 60), (95, 75, 110), (40, 30, 30), (170, 120, 90)],
                           dtype=np.float64)
        seeds_r = rng.uniform(cy - p.radius, cy + p.radius, size=6)
        seeds_c = rng.uniform(cx - p.radius, cx + p.radius, size=6)
        nearest = np.argmin((rr[..., None] - seeds_r) ** 2 + (cc[..., None] - seeds_c) ** 2, axis=-1)
        colors = palette[nearest % len(palette)]
        img[truth] = colors[truth]
        label = "malignant"
    else:
        reach = p.radius + (p.halo_width if p.kind == "halo_disk" else 0.0)
        _check_inside(p, reach)
        truth = dist <= p.radius
        _paint(img, truth, p.lesion_color)
        if p.kind == "halo_disk":
            ring = (dist > p.radius) & (dist <= reach)
            texture = rng.uniform(-p.halo_texture, p.halo_texture, size=(p.height, p.width, 1))
            img[ring] = (np.asarray(HALO, dtype=np.float64) + texture)[ring]
            truth = truth | ring
        elif p.kind == "hairy_disk":
            canvas = quantize(img)
            for _ in range(p.n_hairs):
                _draw_hair(canvas, rng)
            img = canvas.astype(np.float64)
        elif p.kind == "salt_pepper_disk" and p.noise_fraction > 0:
            u = rng.random((p.height, p.width))
            img[u < p.noise_fraction / 2] = 0
            img[(u >= p.noise_fraction / 2) & (u < p.noise_fraction)] = 255
        elif p.kind == "bubble_disk":
            # bright specular ring straddling the lesion border
            by = cy + rng.uniform(-0.3, 0.3) * p.radius
            bx = cx + p.radius * rng.choice([-1.0, 1.0])
            br = p.radius * rng.uniform(0.3, 0.45)
            bd = np.hypot(rr - by, cc - bx)
            rim = np.abs(bd - br) <= 0.8
            img[rim] = (250, 250, 250)

    if p.vignette > 0:
        # dermatoscope field of view: darkening towards the corners
        rad = np.hypot((rr - (p.height - 1) / 2) / ((p.height - 1) / 2 or 1),
                       (cc - (p.width - 1) / 2) / ((p.width - 1) / 2 or 1)) / np.sqrt(2)
        fade = np.clip((rad - 0.7) / 0.3, 0.0, 1.0)
        img = img * (1.0 - p.vignette * fade)[..., None]

    if p.noise_sigma > 0:
        img = img + rng.normal(0.0, p.noise_sigma, size=img.shape)
    return quantize(img), truth, label


def phantom_suite(n: int = 30, seed: int = 0, noise_sigma: float = 3.0):
    """A mixed suite cycling through the artifact kinds (halo, salt-pepper, hair, bubble)."""
    kinds = ("halo_disk", "salt_pepper_disk", "hairy_disk", "bubble_disk", "disk")
    rng = np.random.default_rng(seed)
    suite = []
    for i in range(n):
        kind = kinds[i % len(kinds)]
        radius = float(rng.uniform(16, 24))
        jitter = rng.uniform(-6, 6, size=2)
        center = (54.5 + jitter[0], 54.5 + jitter[1])
        extra = {}
        if kind == "halo_disk":
            # small lesion, wide pale halo, dark field-of-view corners
            extra = dict(radius=float(rng.uniform(11, 13)), halo_width=10.0, vignette=0.75)
        params = dict(kind=kind, radius=radius, center=center, seed=int(rng.integers(2**31)),
                      noise_sigma=noise_sigma)
        params.update(extra)
        suite.append(Phantom(**params))
    return suite


def separable_suite(n_each: int = 10, seed: int = 0, noise_sigma: float = 2.0):
    """Bland round benign disks followed by variegated, lobed malignant blobs."""
    rng = np.random.default_rng(seed)
    suite = []
    for kind in ("disk", "irregular"):
        for _ in range(n_each):
            radius = float(rng.uniform(16, 22) if kind == "disk" else rng.uniform(18, 22))
            jitter = rng.uniform(-4, 4, size=2)
            suite.append(Phantom(kind=kind, radius=radius, center=(54.5 + jitter[0], 54.5 + jitter[1]),
                                 seed=int(rng.integers(2**31)), noise_sigma=noise_sigma))
    return suite


def write_phantom_corpus(root, phantoms, prefix: str = "PH") -> list:
    """Write phantoms as an ISIC-style corpus (image, ``_Segmentation.png`` mask,
    ``labels.csv``). Returns the ids in order."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    ids = []
    rows = []
    for i, p in enumerate(phantoms):
        img, truth, label = make_phantom(p)
        sid = f"{prefix}_{i:04d}"
        write_image(root / f"{sid}.png", img)
        write_mask(root / f"{sid}_Segmentation.png", truth)
        ids.append(sid)
        rows.append((sid, label))
    with (root / "labels.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "label"])
        writer.writerows(rows)
    return ids
