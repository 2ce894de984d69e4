"""Regions of interest on the EIT image grid.

Conventions (standard EIT display): image top is anterior, image left is the
patient's right. Quadrants are numbered

    quadrant1 = anterior-right   quadrant2 = anterior-left
    quadrant3 = posterior-right  quadrant4 = posterior-left

Horizontal bands run top to bottom (A, MA, MP, P); vertical bands run image
left to right (R, MR, ML, L). Every region is intersected with the lung field.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import FormatError

REGION_NAMES = (
    "global",
    "right",
    "left",
    "anterior",
    "posterior",
    "quadrant1",
    "quadrant2",
    "quadrant3",
    "quadrant4",
    "horizontalA",
    "horizontalMA",
    "horizontalMP",
    "horizontalP",
    "verticalR",
    "verticalMR",
    "verticalML",
    "verticalL",
)

PARTITIONS = {
    "right_left": ("right", "left"),
    "anterior_posterior": ("anterior", "posterior"),
    "quadrants": ("quadrant1", "quadrant2", "quadrant3", "quadrant4"),
    "horizontal": ("horizontalA", "horizontalMA", "horizontalMP", "horizontalP"),
    "vertical": ("verticalR", "verticalMR", "verticalML", "verticalL"),
}

# left<->right mirror image of each region name
MIRROR = {
    "global": "global",
    "right": "left",
    "left": "right",
    "anterior": "anterior",
    "posterior": "posterior",
    "quadrant1": "quadrant2",
    "quadrant2": "quadrant1",
    "quadrant3": "quadrant4",
    "quadrant4": "quadrant3",
    "horizontalA": "horizontalA",
    "horizontalMA": "horizontalMA",
    "horizontalMP": "horizontalMP",
    "horizontalP": "horizontalP",
    "verticalR": "verticalL",
    "verticalMR": "verticalML",
    "verticalML": "verticalMR",
    "verticalL": "verticalR",
}


@dataclass(frozen=True, eq=False)
class RoiAtlas:
    width: int
    height: int
    lung_field: np.ndarray
    regions: dict

    @property
    def grid(self) -> tuple[int, int]:
        return self.width, self.height

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.regions)

    def mask(self, name: str) -> np.ndarray:
        try:
            return self.regions[name]
        except KeyError:
            raise KeyError(f"unknown region {name!r}; known: {', '.join(self.regions)}") from None

    def pixels(self, name: str) -> list[tuple[int, int]]:
        return [tuple(int(i) for i in rc) for rc in np.argwhere(self.mask(name))]

    def mask_matrix(self) -> np.ndarray:
        """(height*width, n_regions) 0/1 matrix; column order follows ``names``."""
        return np.stack([m.ravel() for m in self.regions.values()], axis=1).astype(np.float64)

    def __eq__(self, other):
        if not isinstance(other, RoiAtlas):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.names == other.names
            and all(np.array_equal(self.regions[k], other.regions[k]) for k in self.regions)
        )


def disc_mask(width: int, height: int) -> np.ndarray:
    """Pixels whose centres fall inside the grid's inscribed disc."""
    rows, cols = np.mgrid[0:height, 0:width]
    cy, cx = height / 2.0, width / 2.0
    r = min(width, height) / 2.0
    return (rows + 0.5 - cy) ** 2 + (cols + 0.5 - cx) ** 2 <= r * r


def build_atlas(width: int = 32, height: int = 32, lung_field=None) -> RoiAtlas:
    """Build the 17-region atlas (global plus 16 ROIs).

    ``lung_field`` may be a boolean ``(height, width)`` array or an iterable of
    ``(row, col)`` pixels; the default is the inscribed disc.
    """
    if width < 4 or height < 4 or width % 4 or height % 4:
        raise ValueError(f"grid {width}x{height} must have both sides divisible by 4")
    if lung_field is None:
        field = disc_mask(width, height)
    else:
        field = _as_mask(lung_field, width, height)
    if not field.any():
        raise ValueError("lung field is empty")

    rows, cols = np.mgrid[0:height, 0:width]
    qh, qw = height // 4, width // 4
    band_r = rows // qh
    band_c = cols // qw
    anterior = rows < height // 2
    right = cols < width // 2

    raw = {
        "global": np.ones_like(field),
        "right": right,
        "left": ~right,
        "anterior": anterior,
        "posterior": ~anterior,
        "quadrant1": anterior & right,
        "quadrant2": anterior & ~right,
        "quadrant3": ~anterior & right,
        "quadrant4": ~anterior & ~right,
    }
    for i, tag in enumerate(("A", "MA", "MP", "P")):
        raw[f"horizontal{tag}"] = band_r == i
    for i, tag in enumerate(("R", "MR", "ML", "L")):
        raw[f"vertical{tag}"] = band_c == i

    regions = {}
    for name in REGION_NAMES:
        m = raw[name] & field
        m.setflags(write=False)
        regions[name] = m
    field = field.copy()
    field.setflags(write=False)
    return RoiAtlas(width, height, field, regions)


def _as_mask(lung_field, width, height) -> np.ndarray:
    arr = np.asarray(lung_field)
    if arr.dtype == bool and arr.shape == (height, width):
        return arr.copy()
    if arr.dtype == bool:
        raise ValueError(f"mask shape {arr.shape} does not match grid ({height}, {width})")
    mask = np.zeros((height, width), dtype=bool)
    pts = np.asarray(list(lung_field), dtype=int).reshape(-1, 2)
    if pts.size and ((pts < 0).any() or (pts[:, 0] >= height).any() or (pts[:, 1] >= width).any()):
        raise ValueError("lung field contains pixels outside the grid")
    mask[pts[:, 0], pts[:, 1]] = True
    return mask


def read_mask(path, width: int = 32, height: int = 32) -> np.ndarray:
    """Read a ``row,col`` pixel CSV (optional header) into a boolean mask."""
    path = Path(path)
    pts = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or (lineno == 1 and line.replace(" ", "").lower() == "row,col"):
            continue
        try:
            r, c = (int(v) for v in line.split(","))
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: expected 'row,col', got {line!r}") from None
        pts.append((r, c))
    try:
        return _as_mask(pts, width, height)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_mask(mask: np.ndarray, path) -> None:
    from .core import atomic_write

    lines = ["row,col"] + [f"{r},{c}" for r, c in np.argwhere(mask)]
    atomic_write(path, "\n".join(lines) + "\n")
