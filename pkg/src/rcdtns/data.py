"""Dataset ingestion and the template-deformation synthetic generator.

Supported inputs: IDX image/label pairs (big-endian, magics 0x803/0x801),
and CSV manifests (``path,label`` header) pointing at binary PGM (P5) files
with 8- or 16-bit samples.  Intensities are scaled to [0, 1] by the maximum
representable value.  The label ``__ood__`` marks out-of-class test samples.

Synthetic datasets realize the template generative model: each sample is an
affine deformation (translation, isotropic scale, shear) of a class template,
renormalized to the template's total mass.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import FormatError, GenerationFailed, InvalidInput

OOD_LABEL = "__ood__"
IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

# fraction of (determinant-adjusted) mass a deformation may push outside the
# frame before the draw is rejected and retried
MAX_MASS_LOSS = 0.10
MAX_REDRAWS = 100

__all__ = [
    "OOD_LABEL",
    "DeformationSpec",
    "LabeledDataset",
    "Template",
    "default_templates",
    "generate_synthetic",
    "load_dataset",
    "load_directory",
    "load_idx",
    "warp_affine",
    "write_dataset",
    "write_pgm",
]


@dataclass
class LabeledDataset:
    """Stack of same-shape images with one string label each."""

    images: np.ndarray  # (N, H, W), float64 in [0, 1]-ish scale
    labels: list[str]

    def __post_init__(self):
        if self.images.ndim != 3:
            raise InvalidInput(f"images must be (N, H, W), got shape {self.images.shape}")
        if self.images.shape[0] != len(self.labels):
            raise InvalidInput(
                f"{self.images.shape[0]} images but {len(self.labels)} labels"
            )

    def __len__(self):
        return self.images.shape[0]

    def class_labels(self) -> list[str]:
        """Sorted in-class labels (excludes the out-of-class marker)."""
        return sorted({lab for lab in self.labels if lab != OOD_LABEL})

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices)
        return LabeledDataset(self.images[idx], [self.labels[i] for i in idx])


# ---------------------------------------------------------------------------
# IDX files
# ---------------------------------------------------------------------------

def _read_be32(f, path) -> int:
    data = f.read(4)
    if len(data) != 4:
        raise FormatError(f"{path}: truncated header")
    return struct.unpack(">I", data)[0]


def load_idx(images_path, labels_path) -> LabeledDataset:
    """Load a big-endian IDX image/label file pair, intensities scaled by 255."""
    images_path, labels_path = Path(images_path), Path(labels_path)
    with open(images_path, "rb") as f:
        magic = _read_be32(f, images_path)
        if magic != IDX_IMAGE_MAGIC:
            raise FormatError(
                f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}"
            )
        count = _read_be32(f, images_path)
        rows = _read_be32(f, images_path)
        cols = _read_be32(f, images_path)
        raw = f.read(count * rows * cols)
        if len(raw) != count * rows * cols:
            raise FormatError(f"{images_path}: truncated pixel data")
        images = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows, cols)
    with open(labels_path, "rb") as f:
        magic = _read_be32(f, labels_path)
        if magic != IDX_LABEL_MAGIC:
            raise FormatError(
                f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}"
            )
        n_labels = _read_be32(f, labels_path)
        raw = f.read(n_labels)
        if len(raw) != n_labels:
            raise FormatError(f"{labels_path}: truncated label data")
        labels = np.frombuffer(raw, dtype=np.uint8)
    if n_labels != count:
        raise FormatError(
            f"label count {n_labels} does not match image count {count}"
        )
    return LabeledDataset(
        images=images.astype(np.float64) / 255.0,
        labels=[str(int(v)) for v in labels],
    )


# ---------------------------------------------------------------------------
# PGM (P5) files and CSV manifests
# ---------------------------------------------------------------------------

def _read_pgm_tokens(f, path, n_tokens):
    """Read whitespace-separated header tokens, skipping # comments."""
    tokens = []
    while len(tokens) < n_tokens:
        ch = f.read(1)
        if not ch:
            raise FormatError(f"{path}: truncated PGM header")
        if ch.isspace():
            continue
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = f.read(1)
            continue
        token = ch
        while True:
            ch = f.read(1)
            if not ch or ch.isspace():
                break
            token += ch
        tokens.append(token)
    return tokens


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5) file, scaled to [0, 1] by its maxval."""
    path = Path(path)
    with open(path, "rb") as f:
        if f.read(2) != b"P5":
            raise FormatError(f"{path}: not a binary PGM (P5) file")
        width, height, maxval = (int(t) for t in _read_pgm_tokens(f, path, 3))
        if not 0 < maxval < 65536:
            raise FormatError(f"{path}: maxval {maxval} out of range")
        n_bytes = 2 if maxval > 255 else 1
        raw = f.read(width * height * n_bytes)
        if len(raw) != width * height * n_bytes:
            raise FormatError(f"{path}: truncated pixel data")
    dtype = ">u2" if n_bytes == 2 else np.uint8
    pixels = np.frombuffer(raw, dtype=dtype).reshape(height, width)
    return pixels.astype(np.float64) / maxval


def write_pgm(path, image, maxval: int = 65535) -> None:
    """Write an image as binary PGM, scaled so its peak maps to ``maxval``."""
    image = np.asarray(image, dtype=np.float64)
    peak = image.max()
    scale = maxval / peak if peak > 0 else 0.0
    quantized = np.rint(image * scale).astype(">u2" if maxval > 255 else np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{image.shape[1]} {image.shape[0]}\n{maxval}\n".encode())
        f.write(quantized.tobytes())


def load_directory(manifest_path) -> LabeledDataset:
    """Load a dataset from a ``path,label`` CSV manifest of PGM files.

    Paths are resolved relative to the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise FormatError(f"{manifest_path}: manifest not found")
    with open(manifest_path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["path", "label"]:
            raise FormatError(
                f"{manifest_path}: expected header 'path,label', got {header}"
            )
        rows = [row for row in reader if row]
    images, labels = [], []
    shape = None
    for row in rows:
        if len(row) != 2:
            raise FormatError(f"{manifest_path}: malformed row {row}")
        rel, label = row
        path = manifest_path.parent / rel
        if not path.exists():
            raise FormatError(f"{path}: file not found")
        image = read_pgm(path)
        if shape is None:
            shape = image.shape
        elif image.shape != shape:
            raise FormatError(
                f"{path}: image size {image.shape} differs from {shape}"
            )
        images.append(image)
        labels.append(label)
    if not images:
        return LabeledDataset(images=np.zeros((0, 1, 1)), labels=[])
    return LabeledDataset(images=np.stack(images), labels=labels)


def write_dataset(dataset: LabeledDataset, out_dir) -> Path:
    """Write a dataset as PGM files plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.csv"
    digits = max(4, len(str(max(len(dataset) - 1, 0))))
    with open(manifest, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["path", "label"])
        for i in range(len(dataset)):
            name = f"sample_{i:0{digits}d}.pgm"
            write_pgm(out_dir / name, dataset.images[i])
            writer.writerow([name, dataset.labels[i]])
    return manifest


def load_dataset(images=None, labels=None, manifest=None) -> LabeledDataset:
    """Dispatch to the IDX or manifest loader depending on which paths are given."""
    if manifest is not None:
        return load_directory(manifest)
    if images is not None and labels is not None:
        return load_idx(images, labels)
    raise InvalidInput("provide either a manifest path or an IDX images/labels pair")


# ---------------------------------------------------------------------------
# Templates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Template:
    """A class prototype image with positive total mass."""

    image: np.ndarray
    name: str

    def __post_init__(self):
        image = np.asarray(self.image, dtype=np.float64)
        if image.min() < 0.0 or image.sum() <= 0.0:
            raise InvalidInput(f"template {self.name!r} must be nonnegative with positive mass")
        image.flags.writeable = False
        object.__setattr__(self, "image", image)


def _centered_grid(size):
    c = (size - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    return xx - c, yy - c


def make_gaussian_blob(size: int = 64, sigma: float | None = None) -> np.ndarray:
    sigma = sigma if sigma is not None else size / 8.0
    xx, yy = _centered_grid(size)
    return np.exp(-(xx**2 + yy**2) / (2.0 * sigma**2))


def make_ring(size: int = 64, radius: float | None = None, width: float | None = None) -> np.ndarray:
    radius = radius if radius is not None else size / 4.0
    width = width if width is not None else size / 16.0
    xx, yy = _centered_grid(size)
    r = np.hypot(xx, yy)
    return np.exp(-((r - radius) ** 2) / (2.0 * width**2))


def make_cross(size: int = 64, arm: float | None = None, thickness: float | None = None) -> np.ndarray:
    arm = arm if arm is not None else size * 0.3
    thickness = thickness if thickness is not None else size / 16.0
    xx, yy = _centered_grid(size)
    bar_h = (np.abs(yy) < thickness) & (np.abs(xx) < arm)
    bar_v = (np.abs(xx) < thickness) & (np.abs(yy) < arm)
    return ndimage.gaussian_filter((bar_h | bar_v).astype(np.float64), size / 64.0)


def make_crescent(size: int = 64, radius: float | None = None) -> np.ndarray:
    radius = radius if radius is not None else size / 4.0
    xx, yy = _centered_grid(size)
    disk = np.clip(radius - np.hypot(xx, yy), 0.0, None)
    bite = np.clip(radius - np.hypot(xx - radius * 0.6, yy), 0.0, None)
    return ndimage.gaussian_filter(np.clip(disk - 1.2 * bite, 0.0, None), size / 64.0)


_TEMPLATE_MAKERS = {
    "gaussian": make_gaussian_blob,
    "ring": make_ring,
    "cross": make_cross,
    "crescent": make_crescent,
}


def default_templates(size: int = 64, names=None) -> list[Template]:
    """Built-in template set; ``crescent`` is conventionally held out as OOD."""
    names = list(names) if names is not None else list(_TEMPLATE_MAKERS)
    templates = []
    for name in names:
        maker = _TEMPLATE_MAKERS.get(name)
        if maker is None:
            raise InvalidInput(
                f"unknown template {name!r}; available: {sorted(_TEMPLATE_MAKERS)}"
            )
        templates.append(Template(image=maker(size), name=name))
    return templates


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeformationSpec:
    """Ranges of the random affine deformations drawn per sample.

    ``translate`` caps the absolute shift in pixels along (x, y); scale is an
    isotropic ratio range; shear is the dimensionless off-diagonal term.  The
    composed map is translation . scale . shear about the image center.
    """

    translate: tuple[float, float] = (0.0, 0.0)
    scale: tuple[float, float] = (1.0, 1.0)
    shear: tuple[float, float] = (0.0, 0.0)
    count: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.scale[0] <= 0.0 or self.scale[1] < self.scale[0]:
            raise InvalidInput(f"scale range must satisfy 0 < lo <= hi, got {self.scale}")
        if self.translate[0] < 0.0 or self.translate[1] < 0.0:
            raise InvalidInput(f"translate caps must be nonnegative, got {self.translate}")
        if self.shear[1] < self.shear[0]:
            raise InvalidInput(f"shear range must satisfy lo <= hi, got {self.shear}")
        if self.count < 0:
            raise InvalidInput(f"count must be nonnegative, got {self.count}")


def warp_affine(image: np.ndarray, matrix: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Apply ``p -> matrix @ (p - c) + c + shift`` about the center, bilinear.

    ``matrix`` and ``shift`` act on (x, y) coordinates (x right, y down).
    """
    h, w = image.shape
    center = np.array([(w - 1) / 2.0, (h - 1) / 2.0])
    inv = np.linalg.inv(matrix)
    # ndimage maps output (row, col) through `matrix @ out + offset` in input
    # coordinates; convert our (x, y) map to (row, col) form
    inv_rc = np.array([[inv[1, 1], inv[1, 0]], [inv[0, 1], inv[0, 0]]])
    center_rc = center[::-1]
    shift_rc = np.asarray(shift, dtype=np.float64)[::-1]
    offset = center_rc - inv_rc @ (center_rc + shift_rc)
    return ndimage.affine_transform(image, inv_rc, offset=offset, order=1, mode="constant")


def _draw_deformation(rng, spec: DeformationSpec):
    tx = rng.uniform(-spec.translate[0], spec.translate[0])
    ty = rng.uniform(-spec.translate[1], spec.translate[1])
    scale = rng.uniform(spec.scale[0], spec.scale[1])
    shear = rng.uniform(spec.shear[0], spec.shear[1])
    matrix = np.array([[scale, 0.0], [0.0, scale]]) @ np.array([[1.0, shear], [0.0, 1.0]])
    return matrix, np.array([tx, ty])


def generate_synthetic(
    templates,
    spec: DeformationSpec,
    ood_names=(),
) -> LabeledDataset:
    """Draw ``spec.count`` deformed samples per template.

    Each sample is renormalized to its template's total mass.  A draw whose
    warp pushes more than 10% of the mass outside the frame is redrawn, up to
    100 times, after which generation fails.  Templates listed in
    ``ood_names`` are labeled ``__ood__`` instead of their own name.

    Per-class random streams are seeded by (seed, class index), so the output
    is reproducible regardless of how classes might be generated in parallel.
    """
    templates = list(templates)
    if not templates:
        raise InvalidInput("need at least one template")
    ood_names = set(ood_names)
    shape = templates[0].image.shape
    images, labels = [], []
    for k, template in enumerate(templates):
        if template.image.shape != shape:
            raise InvalidInput("all templates must share one image shape")
        rng = np.random.default_rng([spec.seed, k])
        mass = template.image.sum()
        label = OOD_LABEL if template.name in ood_names else template.name
        for _ in range(spec.count):
            for attempt in range(MAX_REDRAWS + 1):
                matrix, shift = _draw_deformation(rng, spec)
                warped = np.clip(warp_affine(template.image, matrix, shift), 0.0, None)
                expected = abs(np.linalg.det(matrix)) * mass
                if warped.sum() >= (1.0 - MAX_MASS_LOSS) * expected:
                    break
            else:
                raise GenerationFailed(
                    f"template {template.name!r}: exceeded {MAX_REDRAWS} redraws; "
                    "deformation ranges push too much mass out of frame"
                )
            images.append(warped * (mass / warped.sum()))
            labels.append(label)
    if not images:
        return LabeledDataset(images=np.zeros((0,) + shape), labels=[])
    return LabeledDataset(images=np.stack(images), labels=labels)
