"""Dense 3D scalar volumes with physical voxel spacing.

Arrays are stored C-ordered as ``data[z, y, x]`` so that ``data.ravel()``
walks the voxels x-fastest: flat offset of ``(x, y, z)`` is
``x + Sx * (y + Sy * z)``.  All coordinates in the public API are given as
``(x, y, z)`` triples.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

DTYPE_CODES = {
    "u8": np.uint8,
    "u16": np.uint16,
    "u32": np.uint32,
    "f32": np.float32,
}
_CODE_OF = {np.dtype(v): k for k, v in DTYPE_CODES.items()}


class Volume:
    """A 3D grid of scalars plus the physical length of one voxel step per axis.

    Treat instances as immutable once they are shared between pipeline stages.
    """

    __slots__ = ("data", "spacing")

    def __init__(self, data: np.ndarray, spacing=(1.0, 1.0, 1.0)):
        data = np.asarray(data)
        if data.ndim != 3 or data.size == 0:
            raise ValueError(f"volume data must be a non-empty 3D array, got shape {data.shape}")
        if data.dtype not in _CODE_OF:
            raise ValueError(f"unsupported dtype {data.dtype}; use one of {sorted(DTYPE_CODES)}")
        spacing = (float(spacing[0]), float(spacing[1]), float(spacing[2]))
        if min(spacing) <= 0:
            raise ValueError(f"spacing components must be > 0, got {spacing}")
        self.data = np.ascontiguousarray(data)
        self.spacing = spacing

    @classmethod
    def from_flat(cls, flat, size, spacing=(1.0, 1.0, 1.0), dtype=None) -> "Volume":
        sx, sy, sz = (int(s) for s in size)
        flat = np.asarray(flat, dtype=dtype)
        if flat.size != sx * sy * sz:
            raise ValueError(f"flat data has {flat.size} samples, size {size} needs {sx * sy * sz}")
        return cls(flat.reshape(sz, sy, sx), spacing)

    @property
    def size(self) -> tuple[int, int, int]:
        """(Sx, Sy, Sz)."""
        sz, sy, sx = self.data.shape
        return (sx, sy, sz)

    @property
    def dtype_code(self) -> str:
        return _CODE_OF[self.data.dtype]

    @property
    def voxel_volume(self) -> float:
        dx, dy, dz = self.spacing
        return dx * dy * dz

    def __getitem__(self, xyz):
        x, y, z = xyz
        return self.data[z, y, x]

    def astype(self, code: str) -> "Volume":
        return Volume(self.data.astype(DTYPE_CODES[code]), self.spacing)

    def __eq__(self, other):
        return (
            isinstance(other, Volume)
            and self.spacing == other.spacing
            and self.data.dtype == other.data.dtype
            and self.data.shape == other.data.shape
            and bool(np.array_equal(self.data, other.data))
        )

    def __repr__(self):
        return f"Volume(size={self.size}, spacing={self.spacing}, dtype={self.dtype_code})"


@dataclass(frozen=True)
class Component:
    """A 6-connected set of foreground voxels.

    ``coords`` is an (N, 3) integer array with columns (x, y, z), rows in
    x-fastest scan order.
    """

    id: int
    coords: np.ndarray

    def __post_init__(self):
        if self.coords.ndim != 2 or self.coords.shape[1] != 3 or len(self.coords) == 0:
            raise ValueError("component coords must be a non-empty (N, 3) array")

    def __len__(self) -> int:
        return len(self.coords)

    def first_flat_index(self, size) -> int:
        """Scan-order offset of the first voxel inside a volume of ``size``."""
        sx, sy, _ = size
        x, y, z = (int(v) for v in self.coords[0])
        return x + sx * (y + sy * z)

    def bounding_box(self):
        lo = self.coords.min(axis=0)
        hi = self.coords.max(axis=0)
        return lo, hi


def physical_distance(p, q, spacing) -> float:
    """Euclidean distance between voxel coordinates scaled by the spacing."""
    d = (np.asarray(p, dtype=np.float64) - np.asarray(q, dtype=np.float64)) * np.asarray(
        spacing, dtype=np.float64
    )
    return float(np.sqrt(np.dot(d, d)))


def pixel_distance(p, q, kind: int = 6) -> int:
    """Grid step distance: ``kind=6`` city-block, ``kind=26`` checkerboard."""
    d = np.abs(np.asarray(p, dtype=np.int64) - np.asarray(q, dtype=np.int64))
    if kind == 6:
        return int(d.sum())
    if kind == 26:
        return int(d.max())
    raise ValueError(f"kind must be 6 or 26, got {kind}")


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Sampled Gaussian, truncated at ceil(3*sigma), renormalized to sum 1."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2) if sigma > 0 else np.ones(1)
    return k / k.sum()


def gaussian_smooth(v: Volume, sigma: float) -> Volume:
    """Separable Gaussian blur with edge replication at the borders.

    The kernel standard deviation is in voxel units per axis.  ``sigma=0``
    returns the input volume unchanged; otherwise, a float32 volume.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return v
    radius = int(np.ceil(3.0 * sigma))
    out = v.data.astype(np.float32)
    for axis in range(3):
        out = ndimage.gaussian_filter1d(
            out, sigma, axis=axis, mode="nearest", radius=radius, output=np.float32
        )
    return Volume(out, v.spacing)


def _unpack_flat(flat_idx: np.ndarray, sx: int, sy: int) -> np.ndarray:
    x = flat_idx % sx
    rest = flat_idx // sx
    y = rest % sy
    z = rest // sy
    return np.stack([x, y, z], axis=1).astype(np.int32)


def label_mask(mask: Volume, connectivity: int = 6) -> tuple[np.ndarray, int]:
    """Label a binary volume; ids are 1..n in scan order of each component's first voxel."""
    if connectivity not in (6, 26):
        raise ValueError(f"connectivity must be 6 or 26, got {connectivity}")
    structure = ndimage.generate_binary_structure(3, 1 if connectivity == 6 else 3)
    lab, n = ndimage.label(mask.data != 0, structure=structure)
    if n > 1:
        # scipy happens to number in scan order already; pin it down regardless
        flat = lab.ravel()
        nz = np.flatnonzero(flat)
        first = np.full(n + 1, flat.size, dtype=np.int64)
        np.minimum.at(first, flat[nz], nz)
        remap = np.zeros(n + 1, dtype=lab.dtype)
        remap[1 + np.argsort(first[1:], kind="stable")] = np.arange(1, n + 1)
        lab = remap[lab]
    return lab.astype(np.uint32), int(n)


def components_from_labels(labels: np.ndarray, n: int) -> list[Component]:
    sz, sy, sx = labels.shape
    flat = labels.ravel()
    nz = np.flatnonzero(flat)
    if len(nz) == 0:
        return []
    order = np.argsort(flat[nz], kind="stable")  # groups by label, scan order within
    nz = nz[order]
    vals = flat[nz]
    starts = np.searchsorted(vals, np.arange(1, n + 2))
    out = []
    for cid in range(1, n + 1):
        seg = nz[starts[cid - 1] : starts[cid]]
        out.append(Component(id=cid, coords=_unpack_flat(seg, sx, sy)))
    return out


def connected_components(mask: Volume, connectivity: int = 6) -> list[Component]:
    """Split the foreground of a binary volume into maximal connected sets."""
    labels, n = label_mask(mask, connectivity)
    return components_from_labels(labels, n)


def paint_component(c: Component, pad: int = 0):
    """Binary array of the component inside its padded bounding box.

    Returns ``(box, origin)`` where ``origin`` is the (x, y, z) of box voxel
    (0, 0, 0) in volume coordinates (may be negative when padded).
    """
    lo, hi = c.bounding_box()
    origin = lo - pad
    shape = hi - lo + 1 + 2 * pad
    box = np.zeros((shape[2], shape[1], shape[0]), dtype=bool)
    rel = c.coords - origin
    box[rel[:, 2], rel[:, 1], rel[:, 0]] = True
    return box, origin


def component_border(c: Component, mask: Volume | None = None) -> np.ndarray:
    """Voxels of the component with at least one 6-neighbor outside it.

    The volume boundary counts as outside.  Returns (M, 3) coords in scan order.
    """
    if mask is not None:
        sx, sy, sz = mask.size
        if (c.coords.max(axis=0) >= (sx, sy, sz)).any() or c.coords.min() < 0:
            raise ValueError("component exceeds mask bounds")
    box, origin = paint_component(c, pad=1)
    interior = (
        box[1:-1, 1:-1, 1:-1]
        & box[:-2, 1:-1, 1:-1]
        & box[2:, 1:-1, 1:-1]
        & box[1:-1, :-2, 1:-1]
        & box[1:-1, 2:, 1:-1]
        & box[1:-1, 1:-1, :-2]
        & box[1:-1, 1:-1, 2:]
    )
    border = box[1:-1, 1:-1, 1:-1] & ~interior
    zz, yy, xx = np.nonzero(border)
    coords = np.stack([xx, yy, zz], axis=1).astype(np.int32) + (origin + 1)
    flat = coords[:, 0] + (coords[:, 1].astype(np.int64) + coords[:, 2].astype(np.int64) * 2**20) * 2**20
    return coords[np.argsort(flat, kind="stable")]


def write_rvol(path, v: Volume) -> None:
    """Write a volume as raw little-endian samples plus a JSON sidecar header.

    The samples go to ``path``, the header to ``path + '.json'``.
    """
    path = os.fspath(path)
    header = {"size": list(v.size), "spacing": list(v.spacing), "dtype": v.dtype_code}
    le = v.data.astype(v.data.dtype.newbyteorder("<"), copy=False)
    with open(path, "wb") as f:
        f.write(le.tobytes())
    with open(path + ".json", "w") as f:
        json.dump(header, f)
        f.write("\n")


def read_rvol(path) -> Volume:
    """Read a volume written by :func:`write_rvol`."""
    path = os.fspath(path)
    with open(path + ".json") as f:
        header = json.load(f)
    for field in ("size", "spacing", "dtype"):
        if field not in header:
            raise ValueError(f"rvol header missing field '{field}'")
    if header["dtype"] not in DTYPE_CODES:
        raise ValueError(f"rvol header dtype '{header['dtype']}' not supported")
    sx, sy, sz = (int(s) for s in header["size"])
    dt = np.dtype(DTYPE_CODES[header["dtype"]]).newbyteorder("<")
    expected = sx * sy * sz * dt.itemsize
    actual = os.path.getsize(path)
    if actual != expected:
        raise ValueError(f"rvol payload is {actual} bytes, header size implies {expected}")
    flat = np.fromfile(path, dtype=dt).astype(DTYPE_CODES[header["dtype"]])
    return Volume.from_flat(flat, (sx, sy, sz), tuple(float(s) for s in header["spacing"]))
