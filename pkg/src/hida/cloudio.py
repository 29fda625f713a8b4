"""Cloud containers, file formats, scene synthesis, and the prediction oracle.

The native exchange format is HLC1, a little-endian binary layout carrying
coordinates plus optional colors, semantic labels, centroid offsets, and
instance ids (layout documented in README.md). PLY is supported for
interchange with external tools and carries geometry, color, and an optional
``label`` vertex property; offsets and instance ids do not survive PLY.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

HLC1_MAGIC = b"HLC1"

_FLAG_COLORS = 1
_FLAG_LABELS = 2
_FLAG_OFFSETS = 4
_FLAG_INSTANCE_IDS = 8

DEFAULT_BACKGROUND_CLASSES = ("floor", "wall")
DEFAULT_CLASS_NAMES = (
    "floor",
    "wall",
    "cabinet",
    "bed",
    "chair",
    "sofa",
    "table",
    "door",
    "bookshelf",
    "desk",
)

# Deterministic per-class display colors, quantized to the 8-bit grid.
_PALETTE = np.array(
    [
        (148, 148, 148),
        (200, 200, 200),
        (31, 119, 180),
        (255, 127, 14),
        (44, 160, 44),
        (214, 39, 40),
        (148, 103, 189),
        (140, 86, 75),
        (227, 119, 194),
        (188, 189, 34),
        (23, 190, 207),
        (174, 199, 232),
    ],
    dtype=np.float32,
) / 255.0


class CloudError(ValueError):
    """Invalid cloud data or scene description."""


class CloudFormatError(CloudError):
    """Unparseable cloud file; carries the failing byte offset when known."""

    def __init__(self, message: str, byte_offset: int | None = None):
        if byte_offset is not None:
            message = f"{message} (byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


@dataclass(frozen=True)
class ClassTable:
    """Semantic class names with a background flag per class."""

    names: tuple[str, ...]
    background: tuple[bool, ...]

    def __post_init__(self):
        if len(self.names) != len(self.background):
            raise CloudError("class table names and background flags differ in length")
        if len(self.names) == 0:
            raise CloudError("class table must not be empty")
        if len(set(self.names)) != len(self.names):
            raise CloudError("class table contains duplicate names")

    @classmethod
    def make(
        cls,
        names: Sequence[str],
        background_names: Sequence[str] = DEFAULT_BACKGROUND_CLASSES,
    ) -> "ClassTable":
        bg = set(background_names)
        return cls(tuple(names), tuple(n in bg for n in names))

    @classmethod
    def default(cls) -> "ClassTable":
        return cls.make(DEFAULT_CLASS_NAMES)

    def __len__(self) -> int:
        return len(self.names)

    def id_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise CloudError(f"unknown class name: {name!r}") from None

    def is_background(self, class_id: int) -> bool:
        return self.background[class_id]

    def background_mask(self, labels: np.ndarray) -> np.ndarray:
        """Boolean mask over ``labels`` marking background-class points."""
        flags = np.asarray(self.background, dtype=bool)
        return flags[labels]

    def to_json(self) -> list[dict]:
        return [
            {"name": n, "background": b}
            for n, b in zip(self.names, self.background)
        ]

    @classmethod
    def from_json(cls, rows: Sequence[dict]) -> "ClassTable":
        return cls(
            tuple(str(r["name"]) for r in rows),
            tuple(bool(r.get("background", False)) for r in rows),
        )


def _as_array(a, dtype, shape_tail: tuple[int, ...], what: str) -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=dtype)
    if arr.ndim != 1 + len(shape_tail) or arr.shape[1:] != shape_tail:
        raise CloudError(f"{what} has shape {arr.shape}, expected (N,{','.join(map(str, shape_tail))})"
                         if shape_tail else f"{what} has shape {arr.shape}, expected (N,)")
    return arr


@dataclass(eq=False)
class LabeledCloud:
    """A point cloud with optional colors, labels, offsets, and instance ids.

    Attributes
    ----------
    points : (N, 3) float32
        Coordinates in meters.
    class_table : ClassTable
        Names and background flags for semantic class ids.
    colors : (N, 3) float32, optional
        RGB in [0, 1]; quantized to the 8-bit grid at construction so that
        binary round trips are bit-exact.
    semantic_labels : (N,) uint16, optional
        Per-point class id into ``class_table``.
    offsets : (N, 3) float32, optional
        Per-point vector toward the point's instance centroid (zero for
        background points).
    instance_ids : (N,) int32, optional
        Ground-truth instance id per point, -1 for none.
    """

    points: np.ndarray
    class_table: ClassTable = field(default_factory=ClassTable.default)
    colors: np.ndarray | None = None
    semantic_labels: np.ndarray | None = None
    offsets: np.ndarray | None = None
    instance_ids: np.ndarray | None = None

    def __post_init__(self):
        self.points = _as_array(self.points, np.float32, (3,), "points")
        n = len(self.points)
        if self.colors is not None:
            c = _as_array(self.colors, np.float32, (3,), "colors")
            self.colors = (np.round(c * 255.0) / np.float32(255.0)).astype(np.float32)
        if self.semantic_labels is not None:
            self.semantic_labels = _as_array(self.semantic_labels, np.uint16, (), "semantic_labels")
        if self.offsets is not None:
            self.offsets = _as_array(self.offsets, np.float32, (3,), "offsets")
        if self.instance_ids is not None:
            self.instance_ids = _as_array(self.instance_ids, np.int32, (), "instance_ids")
        for name in ("colors", "semantic_labels", "offsets", "instance_ids"):
            arr = getattr(self, name)
            if arr is not None and len(arr) != n:
                raise CloudError(f"{name} has {len(arr)} rows for {n} points")

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def has_labels(self) -> bool:
        return self.semantic_labels is not None

    @property
    def has_offsets(self) -> bool:
        return self.offsets is not None

    @property
    def is_labeled(self) -> bool:
        """True when the cloud carries both labels and offsets."""
        return self.has_labels and self.has_offsets

    def validate(self) -> "LabeledCloud":
        """Check invariants beyond shapes; raises CloudError on violation."""
        if not np.isfinite(self.points).all():
            raise CloudError("points contain non-finite coordinates")
        if self.colors is not None:
            if self.colors.min(initial=0.0) < 0.0 or self.colors.max(initial=0.0) > 1.0:
                raise CloudError("colors outside [0, 1]")
        if self.semantic_labels is not None:
            if self.n_points and int(self.semantic_labels.max()) >= len(self.class_table):
                raise CloudError("semantic label outside class table")
        if self.offsets is not None and not np.isfinite(self.offsets).all():
            raise CloudError("offsets contain non-finite values")
        if self.instance_ids is not None:
            if self.n_points and int(self.instance_ids.min()) < -1:
                raise CloudError("instance ids below -1")
        return self

    def subset(self, indices) -> "LabeledCloud":
        """Row-subset every per-point array in lockstep."""
        idx = np.asarray(indices)
        return LabeledCloud(
            points=self.points[idx],
            class_table=self.class_table,
            colors=None if self.colors is None else self.colors[idx],
            semantic_labels=None if self.semantic_labels is None else self.semantic_labels[idx],
            offsets=None if self.offsets is None else self.offsets[idx],
            instance_ids=None if self.instance_ids is None else self.instance_ids[idx],
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledCloud):
            return NotImplemented

        def same(a, b):
            if (a is None) != (b is None):
                return False
            return a is None or np.array_equal(a, b)

        return (
            same(self.points, other.points)
            and self.class_table == other.class_table
            and same(self.colors, other.colors)
            and same(self.semantic_labels, other.semantic_labels)
            and same(self.offsets, other.offsets)
            and same(self.instance_ids, other.instance_ids)
        )


@dataclass(frozen=True)
class GroundTruthInstances:
    """Dense per-point instance ids (-1 = none) plus one class per instance."""

    instance_ids: np.ndarray      # (N,) int32, values in [-1, K)
    instance_classes: np.ndarray  # (K,) uint16

    @classmethod
    def from_cloud(cls, cloud: LabeledCloud) -> "GroundTruthInstances":
        if cloud.instance_ids is None:
            raise CloudError("cloud carries no instance ids")
        if cloud.semantic_labels is None:
            raise CloudError("cloud carries no semantic labels")
        raw = cloud.instance_ids
        present = np.unique(raw[raw >= 0])
        remapped = np.full(len(raw), -1, dtype=np.int32)
        pos = raw >= 0
        remapped[pos] = np.searchsorted(present, raw[pos]).astype(np.int32)
        classes = np.empty(len(present), dtype=np.uint16)
        for k in range(len(present)):
            member_labels = cloud.semantic_labels[remapped == k]
            if member_labels.size == 0:
                raise CloudError(f"instance {k} has no points")
            if not (member_labels == member_labels[0]).all():
                raise CloudError(f"instance {k} mixes semantic classes")
            classes[k] = member_labels[0]
        return cls(remapped, classes)

    @property
    def n_instances(self) -> int:
        return len(self.instance_classes)

    def point_indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.instance_ids == k)

    def validate(self) -> "GroundTruthInstances":
        counts = np.bincount(
            self.instance_ids[self.instance_ids >= 0], minlength=self.n_instances
        )
        if self.n_instances and counts.min() < 1:
            raise CloudError("instance without points")
        return self


@dataclass(frozen=True)
class OracleConfig:
    """Noise model standing in for a trained predictor."""

    label_flip_rate: float = 0.0
    offset_noise_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.label_flip_rate <= 1.0):
            raise CloudError("label_flip_rate outside [0, 1]")
        if self.offset_noise_sigma < 0.0:
            raise CloudError("offset_noise_sigma must be >= 0")


# ---------------------------------------------------------------------------
# HLC1 binary format


def _write_hlc1(cloud: LabeledCloud, path: Path) -> None:
    parts = [HLC1_MAGIC, struct.pack("<QI", cloud.n_points, len(cloud.class_table))]
    for name, bg in zip(cloud.class_table.names, cloud.class_table.background):
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw + struct.pack("<B", int(bg)))
    parts.append(np.ascontiguousarray(cloud.points, dtype="<f4").tobytes())
    flags = 0
    if cloud.colors is not None:
        flags |= _FLAG_COLORS
    if cloud.semantic_labels is not None:
        flags |= _FLAG_LABELS
    if cloud.offsets is not None:
        flags |= _FLAG_OFFSETS
    if cloud.instance_ids is not None:
        flags |= _FLAG_INSTANCE_IDS
    parts.append(struct.pack("<B", flags))
    if cloud.colors is not None:
        parts.append(np.round(cloud.colors * 255.0).astype("<u1").tobytes())
    if cloud.semantic_labels is not None:
        parts.append(np.ascontiguousarray(cloud.semantic_labels, dtype="<u2").tobytes())
    if cloud.offsets is not None:
        parts.append(np.ascontiguousarray(cloud.offsets, dtype="<f4").tobytes())
    if cloud.instance_ids is not None:
        parts.append(np.ascontiguousarray(cloud.instance_ids, dtype="<i4").tobytes())
    path.write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CloudFormatError(f"truncated payload while reading {what}", self.pos)
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def array(self, dtype: str, count: int, what: str) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count, what), dtype=dt)


def _read_hlc1(data: bytes) -> LabeledCloud:
    r = _Reader(data)
    if r.take(4, "magic") != HLC1_MAGIC:
        raise CloudFormatError("bad magic, not an HLC1 file", 0)
    n, n_classes = struct.unpack("<QI", r.take(12, "header"))
    if n_classes == 0 or n_classes > 65535:
        raise CloudFormatError(f"implausible class count {n_classes}", 4)
    names, bgs = [], []
    for i in range(n_classes):
        (ln,) = struct.unpack("<I", r.take(4, f"class {i} name length"))
        if ln > 4096:
            raise CloudFormatError(f"implausible class name length {ln}", r.pos - 4)
        try:
            names.append(r.take(ln, f"class {i} name").decode("utf-8"))
        except UnicodeDecodeError:
            raise CloudFormatError(f"class {i} name is not valid UTF-8", r.pos - ln) from None
        bgs.append(bool(r.take(1, f"class {i} background flag")[0]))
    table = ClassTable(tuple(names), tuple(bgs))

    coords_offset = r.pos
    points = r.array("<f4", n * 3, "coordinates").reshape(n, 3)
    bad = ~np.isfinite(points).all(axis=1)
    if bad.any():
        v = int(np.flatnonzero(bad)[0])
        raise CloudFormatError(
            f"non-finite coordinate at vertex {v}", coords_offset + v * 12
        )
    (flags,) = r.take(1, "presence flags")
    if flags & ~(_FLAG_COLORS | _FLAG_LABELS | _FLAG_OFFSETS | _FLAG_INSTANCE_IDS):
        raise CloudFormatError(f"unknown presence flags 0x{flags:02x}", r.pos - 1)
    colors = labels = offsets = inst = None
    if flags & _FLAG_COLORS:
        colors = r.array("<u1", n * 3, "colors").reshape(n, 3).astype(np.float32) / np.float32(255.0)
    if flags & _FLAG_LABELS:
        labels = r.array("<u2", n, "labels").copy()
        if n and int(labels.max()) >= n_classes:
            raise CloudFormatError(
                f"label {int(labels.max())} outside class table of size {n_classes}"
            )
    if flags & _FLAG_OFFSETS:
        off_at = r.pos
        offsets = r.array("<f4", n * 3, "offsets").reshape(n, 3)
        bad_off = ~np.isfinite(offsets).all(axis=1)
        if bad_off.any():
            v = int(np.flatnonzero(bad_off)[0])
            raise CloudFormatError(f"non-finite offset at vertex {v}", off_at + v * 12)
    if flags & _FLAG_INSTANCE_IDS:
        inst = r.array("<i4", n, "instance ids").copy()
        if n and int(inst.min()) < -1:
            raise CloudFormatError("instance id below -1")
    if r.pos != len(r.data):
        raise CloudFormatError(f"{len(r.data) - r.pos} trailing bytes", r.pos)
    return LabeledCloud(
        points=points.copy(),
        class_table=table,
        colors=colors,
        semantic_labels=labels,
        offsets=None if offsets is None else offsets.copy(),
        instance_ids=inst,
    )


# ---------------------------------------------------------------------------
# PLY

_PLY_DTYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def _read_ply(data: bytes) -> LabeledCloud:
    # Header is ASCII lines terminated by "end_header".
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise CloudFormatError("missing PLY header", 0)
    nl = data.find(b"\n", end)
    if nl < 0:
        raise CloudFormatError("header not terminated", end)
    body_start = nl + 1
    header_lines = data[:end].decode("ascii", errors="replace").splitlines()

    fmt = None
    elements: list[tuple[str, int, list[tuple[str, str]]]] = []
    for line in header_lines:
        tok = line.strip().split()
        if not tok or tok[0] in ("ply", "comment", "obj_info"):
            continue
        if tok[0] == "format":
            if len(tok) < 2 or tok[1] not in ("ascii", "binary_little_endian"):
                raise CloudFormatError(f"unsupported PLY format: {line.strip()!r}")
            fmt = tok[1]
        elif tok[0] == "element":
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise CloudFormatError("property before any element")
            if tok[1] == "list":
                elements[-1][2].append(("list", " ".join(tok[2:])))
            else:
                if tok[1] not in _PLY_DTYPES:
                    raise CloudFormatError(f"unsupported property type {tok[1]!r}")
                elements[-1][2].append((tok[-1], _PLY_DTYPES[tok[1]]))
    if fmt is None:
        raise CloudFormatError("PLY header lacks a format line")
    if not elements or elements[0][0] != "vertex":
        raise CloudFormatError("first PLY element must be vertex")
    _, count, props = elements[0]
    if any(p[0] == "list" for p in props):
        raise CloudFormatError("list properties on vertex element are unsupported")
    names = [p[0] for p in props]
    for need in ("x", "y", "z"):
        if need not in names:
            raise CloudFormatError(f"vertex element lacks property {need!r}")

    if fmt == "binary_little_endian":
        dt = np.dtype([(nm, "<" + code) for nm, code in props])
        need = dt.itemsize * count
        if len(data) - body_start < need:
            raise CloudFormatError(
                "truncated vertex data", body_start + (len(data) - body_start)
            )
        rows = np.frombuffer(data, dtype=dt, count=count, offset=body_start)
        cols = {nm: rows[nm] for nm in names}

        def vertex_offset(i: int) -> int:
            return body_start + i * dt.itemsize

    else:
        text = data[body_start:]
        lines = text.splitlines(keepends=True)
        if len(lines) < count:
            raise CloudFormatError("truncated vertex data", len(data))
        offsets_acc = body_start
        line_offsets = []
        vals = np.empty((count, len(names)), dtype=np.float64)
        for i in range(count):
            line_offsets.append(offsets_acc)
            tok = lines[i].split()
            if len(tok) != len(names):
                raise CloudFormatError(
                    f"vertex {i} has {len(tok)} fields, expected {len(names)}",
                    offsets_acc,
                )
            try:
                vals[i] = [float(t) for t in tok]
            except ValueError:
                raise CloudFormatError(f"unparseable number at vertex {i}", offsets_acc) from None
            offsets_acc += len(lines[i])
        cols = {nm: vals[:, j] for j, nm in enumerate(names)}

        def vertex_offset(i: int) -> int:
            return line_offsets[i]

    points = np.stack(
        [np.asarray(cols["x"], np.float64), np.asarray(cols["y"], np.float64),
         np.asarray(cols["z"], np.float64)], axis=1,
    )
    bad = ~np.isfinite(points).all(axis=1)
    if bad.any():
        v = int(np.flatnonzero(bad)[0])
        raise CloudFormatError(f"non-finite coordinate at vertex {v}", vertex_offset(v))

    colors = None
    if all(c in cols for c in ("red", "green", "blue")):
        colors = np.stack(
            [np.asarray(cols[c], np.float64) for c in ("red", "green", "blue")], axis=1
        ).astype(np.float32) / np.float32(255.0)
    labels = None
    table = ClassTable.default()
    if "label" in cols:
        lab = np.asarray(cols["label"])
        if lab.size and (lab.min() < 0 or lab.max() > 65535):
            raise CloudFormatError("label outside uint16 range")
        labels = lab.astype(np.uint16)
        top = int(labels.max()) if labels.size else 0
        if top >= len(table):
            table = ClassTable.make(
                tuple(f"class_{i}" for i in range(top + 1)), background_names=()
            )
    return LabeledCloud(
        points=points.astype(np.float32),
        class_table=table,
        colors=colors,
        semantic_labels=labels,
    )


def _write_ply(cloud: LabeledCloud, path: Path) -> None:
    props = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {cloud.n_points}"]
    header += ["property float x", "property float y", "property float z"]
    if cloud.colors is not None:
        props += [("red", "<u1"), ("green", "<u1"), ("blue", "<u1")]
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    if cloud.semantic_labels is not None:
        props.append(("label", "<u2"))
        header.append("property ushort label")
    header.append("end_header")
    rows = np.empty(cloud.n_points, dtype=np.dtype(props))
    rows["x"], rows["y"], rows["z"] = cloud.points.T
    if cloud.colors is not None:
        rgb = np.round(cloud.colors * 255.0).astype(np.uint8)
        rows["red"], rows["green"], rows["blue"] = rgb.T
    if cloud.semantic_labels is not None:
        rows["label"] = cloud.semantic_labels
    path.write_bytes("\n".join(header).encode("ascii") + b"\n" + rows.tobytes())


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt:
        f = fmt.lower().replace("internal-binary", "hlc1")
        if f not in ("ply", "hlc1"):
            raise CloudError(f"unknown cloud format {fmt!r}")
        return f
    suffix = path.suffix.lower()
    if suffix == ".ply":
        return "ply"
    if suffix in (".hlc1", ".hlc"):
        return "hlc1"
    raise CloudError(f"cannot infer cloud format from {path.name!r}; pass format=")


def load_cloud(path, fmt: str | None = None) -> LabeledCloud:
    """Load a cloud from PLY or HLC1, inferring the format from the suffix.

    Raises CloudFormatError (with a byte offset where known) on malformed
    input, truncated payloads, or non-finite coordinates.
    """
    p = Path(path)
    data = p.read_bytes()
    if _infer_format(p, fmt) == "ply":
        return _read_ply(data)
    return _read_hlc1(data)


def save_cloud(cloud: LabeledCloud, path, fmt: str | None = None) -> None:
    """Write a cloud to PLY (lossy: geometry/colors/labels) or HLC1 (exact)."""
    p = Path(path)
    cloud.validate()
    if _infer_format(p, fmt) == "ply":
        _write_ply(cloud, p)
    else:
        _write_hlc1(cloud, p)


# ---------------------------------------------------------------------------
# Scene synthesis


@dataclass(frozen=True)
class SceneObject:
    """One axis-aligned box instance to be sampled at a volumetric density."""

    class_name: str
    box_min: tuple[float, float, float]
    box_max: tuple[float, float, float]
    density: float  # points per cubic meter

    def volume(self) -> float:
        ext = [hi - lo for lo, hi in zip(self.box_min, self.box_max)]
        return ext[0] * ext[1] * ext[2]


@dataclass
class SceneSpec:
    """Room extents, background density, and instance boxes for synthesis."""

    room: tuple[float, float, float]
    objects: list[SceneObject] = field(default_factory=list)
    background_density: float = 300.0  # points per square meter of floor/wall
    class_table: ClassTable = field(default_factory=ClassTable.default)
    separation_radius: float = 0.03

    def to_json(self) -> dict:
        return {
            "room": list(self.room),
            "background_density": self.background_density,
            "separation_radius": self.separation_radius,
            "classes": self.class_table.to_json(),
            "objects": [
                {
                    "class": o.class_name,
                    "box_min": list(o.box_min),
                    "box_max": list(o.box_max),
                    "density": o.density,
                }
                for o in self.objects
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SceneSpec":
        table = (
            ClassTable.from_json(obj["classes"])
            if "classes" in obj
            else ClassTable.default()
        )
        return cls(
            room=tuple(float(v) for v in obj["room"]),
            objects=[
                SceneObject(
                    class_name=str(o["class"]),
                    box_min=tuple(float(v) for v in o["box_min"]),
                    box_max=tuple(float(v) for v in o["box_max"]),
                    density=float(o["density"]),
                )
                for o in obj.get("objects", [])
            ],
            background_density=float(obj.get("background_density", 300.0)),
            class_table=table,
            separation_radius=float(obj.get("separation_radius", 0.03)),
        )


def _box_gap(a: SceneObject, b: SceneObject) -> float:
    """Euclidean distance between two axis-aligned boxes (0 if they touch)."""
    d = 0.0
    for axis in range(3):
        lo = max(a.box_min[axis], b.box_min[axis])
        hi = min(a.box_max[axis], b.box_max[axis])
        if lo > hi:
            d += (lo - hi) ** 2
    return float(np.sqrt(d))


def _check_spec(spec: SceneSpec) -> None:
    w, d, h = spec.room
    if min(w, d, h) <= 0:
        raise CloudError("room extents must be positive")
    if spec.background_density < 0:
        raise CloudError("background_density must be >= 0")
    for o in spec.objects:
        spec.class_table.id_of(o.class_name)  # raises on unknown class
        if any(lo >= hi for lo, hi in zip(o.box_min, o.box_max)):
            raise CloudError(f"degenerate box for {o.class_name}")
        if o.density <= 0:
            raise CloudError(f"non-positive density for {o.class_name}")
        inside = all(
            0.0 <= o.box_min[a] and o.box_max[a] <= spec.room[a] for a in range(3)
        )
        if not inside:
            raise CloudError(f"{o.class_name} box leaves the room")
    for i in range(len(spec.objects)):
        for j in range(i + 1, len(spec.objects)):
            a, b = spec.objects[i], spec.objects[j]
            if a.class_name != b.class_name:
                continue
            if _box_gap(a, b) <= spec.separation_radius:
                raise CloudError(
                    "inseparable scene: two "
                    f"{a.class_name!r} boxes within {spec.separation_radius} m"
                )


def synth_scene(spec: SceneSpec, seed: int = 0) -> tuple[LabeledCloud, GroundTruthInstances]:
    """Sample a labeled cloud (background surfaces + box instances) from a spec.

    Points are ordered background-first, then instances in spec order. Offsets
    point to the centroid of each instance's sampled points; background
    offsets are zero. Raises CloudError("inseparable scene ...") when two
    same-class boxes come within ``separation_radius`` of each other.
    """
    _check_spec(spec)
    rng = np.random.default_rng(seed)
    table = spec.class_table
    w, d, h = spec.room

    pts_parts: list[np.ndarray] = []
    lab_parts: list[np.ndarray] = []
    inst_parts: list[np.ndarray] = []

    def add(points_f64: np.ndarray, class_id: int, instance_id: int) -> None:
        pts_parts.append(points_f64.astype(np.float32))
        lab_parts.append(np.full(len(points_f64), class_id, dtype=np.uint16))
        inst_parts.append(np.full(len(points_f64), instance_id, dtype=np.int32))

    rho = spec.background_density
    floor_n = int(round(w * d * rho))
    if floor_n:
        xy = rng.uniform((0, 0), (w, d), size=(floor_n, 2))
        add(np.column_stack([xy, np.zeros(floor_n)]), table.id_of("floor"), -1)
    wall_id = table.id_of("wall")
    for fixed_axis, fixed_val, run in (
        (1, 0.0, w), (1, d, w), (0, 0.0, d), (0, w, d)
    ):
        n = int(round(run * h * rho))
        if not n:
            continue
        along = rng.uniform(0, run, n)
        z = rng.uniform(0, h, n)
        if fixed_axis == 1:
            add(np.column_stack([along, np.full(n, fixed_val), z]), wall_id, -1)
        else:
            add(np.column_stack([np.full(n, fixed_val), along, z]), wall_id, -1)

    for k, o in enumerate(spec.objects):
        n = max(1, int(round(o.density * o.volume())))
        p = rng.uniform(o.box_min, o.box_max, size=(n, 3))
        add(p, table.id_of(o.class_name), k)

    points = np.concatenate(pts_parts) if pts_parts else np.zeros((0, 3), np.float32)
    labels = np.concatenate(lab_parts) if lab_parts else np.zeros(0, np.uint16)
    inst = np.concatenate(inst_parts) if inst_parts else np.zeros(0, np.int32)

    offsets = np.zeros((len(points), 3), dtype=np.float64)
    for k in range(len(spec.objects)):
        member = inst == k
        centroid = points[member].astype(np.float64).mean(axis=0)
        offsets[member] = centroid - points[member].astype(np.float64)

    colors = _PALETTE[np.asarray(labels) % len(_PALETTE)]
    cloud = LabeledCloud(
        points=points,
        class_table=table,
        colors=colors,
        semantic_labels=labels,
        offsets=offsets.astype(np.float32),
        instance_ids=inst,
    ).validate()
    return cloud, GroundTruthInstances.from_cloud(cloud).validate()


def random_scene_spec(
    seed: int,
    n_instances: int | None = None,
    room: tuple[float, float, float] = (6.0, 6.0, 2.5),
    instance_density: float = 3000.0,
    background_density: float | None = None,
    target_points: int | None = None,
    min_gap: float = 0.1,
    class_table: ClassTable | None = None,
) -> SceneSpec:
    """Place 3..8 random non-overlapping boxes in a room and build a SceneSpec.

    All box pairs (any class) are separated by more than ``min_gap``. When
    ``target_points`` is given the background density is solved so the whole
    scene lands near that count.
    """
    rng = np.random.default_rng(seed)
    table = class_table or ClassTable.default()
    fg_classes = [n for n, b in zip(table.names, table.background) if not b]
    if n_instances is None:
        n_instances = int(rng.integers(3, 9))
    w, d, h = room

    placed: list[SceneObject] = []
    margin = 0.3
    for _ in range(n_instances):
        for _attempt in range(300):
            size = rng.uniform(0.4, 0.9, 3)
            size[2] = min(size[2], 1.6)
            lo = np.array(
                [
                    rng.uniform(margin, w - margin - size[0]),
                    rng.uniform(margin, d - margin - size[1]),
                    0.0,
                ]
            )
            cand = SceneObject(
                class_name=str(rng.choice(fg_classes)),
                box_min=tuple(np.round(lo, 4)),
                box_max=tuple(np.round(lo + size, 4)),
                density=instance_density,
            )
            if all(_box_gap(cand, p) > min_gap for p in placed):
                placed.append(cand)
                break
        else:
            raise CloudError("could not place instances without overlap")

    if background_density is None:
        if target_points is not None:
            inst_points = sum(
                max(1, int(round(o.density * o.volume()))) for o in placed
            )
            area = w * d + 2 * h * (w + d)
            background_density = max(50.0, (target_points - inst_points) / area)
        else:
            background_density = 300.0
    return SceneSpec(
        room=room,
        objects=placed,
        background_density=float(background_density),
        class_table=table,
        separation_radius=0.03,
    )


def oracle_predict(
    cloud: LabeledCloud, gt: GroundTruthInstances, cfg: OracleConfig
) -> LabeledCloud:
    """Corrupt ground-truth labels/offsets per the noise config.

    Each point's label flips with probability ``label_flip_rate`` to a
    uniformly random other class; Gaussian noise of ``offset_noise_sigma``
    is added per offset component. One uniform draw and one replacement
    class are consumed per point regardless of the flip mask, so flip sets
    nest across rates at a fixed seed. Zero noise returns identical data.
    """
    if not cloud.is_labeled:
        raise CloudError("oracle_predict requires labels and offsets")
    if len(gt.instance_ids) != cloud.n_points:
        raise CloudError("cloud and ground truth are not aligned")
    n = cloud.n_points
    n_classes = len(cloud.class_table)
    rng = np.random.default_rng(cfg.rng_seed)
    u = rng.random(n)
    repl = rng.integers(0, max(n_classes - 1, 1), size=n)
    noise = rng.normal(0.0, cfg.offset_noise_sigma, size=(n, 3))

    labels = cloud.semantic_labels.copy()
    if n_classes > 1:
        flipped = (repl + (repl >= labels)).astype(np.uint16)
        mask = u < cfg.label_flip_rate
        labels[mask] = flipped[mask]
    offsets = (cloud.offsets.astype(np.float64) + noise).astype(np.float32)
    return replace_fields(cloud, semantic_labels=labels, offsets=offsets)


def replace_fields(cloud: LabeledCloud, **kw) -> LabeledCloud:
    """Return a copy of the cloud with the given per-point arrays replaced."""
    base = dict(
        points=cloud.points,
        class_table=cloud.class_table,
        colors=cloud.colors,
        semantic_labels=cloud.semantic_labels,
        offsets=cloud.offsets,
        instance_ids=cloud.instance_ids,
    )
    base.update(kw)
    return LabeledCloud(**base)
