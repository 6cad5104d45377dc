"""File formats: correspondences (JSON lines), depth maps (PFM / raw f32) and intrinsics.

Correspondence lines look like::

    {"x1": [u, v], "x2": [u, v], "M1": [m11, m12, m21, m22], "M2": [...],
     "l1": 1.7, "l2": 2.1, "g1": [du, dv], "g2": [du, dv]}

The depth keys are optional but come as a group of four. ``g1``/``g2`` are
per-pixel depth gradients; they are expressed along the frame axes
(``g @ M``) when a :class:`DepthObservation` is built.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidDepth, OutOfBounds, ParseError, SchemaError
from .geometry import (
    AffineCorrespondence,
    DepthAffineMatch,
    DepthObservation,
    LocalAffineFrame,
    PinholeCamera,
)

RAW_MAGIC = b"ACDEPTH1"
_DEPTH_KEYS = ("l1", "l2", "g1", "g2")


@dataclass(frozen=True)
class CorrespondenceRecord:
    x1: tuple
    x2: tuple
    M1: tuple
    M2: tuple
    l1: float | None = None
    l2: float | None = None
    g1: tuple | None = None
    g2: tuple | None = None

    @property
    def has_depth(self):
        return self.l1 is not None

    def correspondence(self):
        return AffineCorrespondence(
            LocalAffineFrame(self.x1, np.reshape(self.M1, (2, 2))),
            LocalAffineFrame(self.x2, np.reshape(self.M2, (2, 2))),
        )

    def to_match(self, depth1=None, depth2=None):
        """Bundle with depth, from the record's own fields or from depth maps."""
        M1 = np.reshape(self.M1, (2, 2))
        M2 = np.reshape(self.M2, (2, 2))
        if self.has_depth:
            d1 = DepthObservation(self.l1, np.asarray(self.g1) @ M1)
            d2 = DepthObservation(self.l2, np.asarray(self.g2) @ M2)
        elif depth1 is not None and depth2 is not None:
            d1 = sample_depth(depth1, self.x1, M1)
            d2 = sample_depth(depth2, self.x2, M2)
        else:
            raise InvalidDepth("record carries no depth and no depth maps were given")
        return DepthAffineMatch(self.correspondence(), d1, d2)

    def to_json(self):
        d = {"x1": list(self.x1), "x2": list(self.x2), "M1": list(self.M1), "M2": list(self.M2)}
        if self.has_depth:
            d.update(l1=self.l1, l2=self.l2, g1=list(self.g1), g2=list(self.g2))
        return d


def _vector(obj, key, n, line):
    v = obj[key]
    if not isinstance(v, list) or len(v) != n:
        raise SchemaError(line, f"'{key}' must be a list of {n} numbers")
    out = []
    for e in v:
        if isinstance(e, bool) or not isinstance(e, (int, float)) or not math.isfinite(e):
            raise SchemaError(line, f"'{key}' has a non-finite or non-numeric entry")
        out.append(float(e))
    return tuple(out)


def _scalar(obj, key, line):
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise SchemaError(line, f"'{key}' must be a finite number")
    return float(v)


def parse_record(obj, line=0):
    if not isinstance(obj, dict):
        raise SchemaError(line, "expected a JSON object")
    for key in ("x1", "x2", "M1", "M2"):
        if key not in obj:
            raise SchemaError(line, f"missing field '{key}'")
    present = [k for k in _DEPTH_KEYS if k in obj]
    if present and len(present) != len(_DEPTH_KEYS):
        missing = sorted(set(_DEPTH_KEYS) - set(present))
        raise SchemaError(line, f"depth fields must come together; missing {missing}")
    rec = dict(
        x1=_vector(obj, "x1", 2, line), x2=_vector(obj, "x2", 2, line),
        M1=_vector(obj, "M1", 4, line), M2=_vector(obj, "M2", 4, line),
    )
    if present:
        rec.update(
            l1=_scalar(obj, "l1", line), l2=_scalar(obj, "l2", line),
            g1=_vector(obj, "g1", 2, line), g2=_vector(obj, "g2", 2, line),
        )
    return CorrespondenceRecord(**rec)


def load_correspondences(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, exc.msg) from exc
            records.append(parse_record(obj, lineno))
    return records


def save_correspondences(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json()) + "\n")


def records_from_scene(scene):
    """Serializable records for a synthetic scene (pixel-gradient convention)."""
    out = []
    for i in range(len(scene)):
        g1 = scene.grad1[i] @ np.linalg.inv(scene.M1[i])
        g2 = scene.grad2[i] @ np.linalg.inv(scene.M2[i])
        out.append(CorrespondenceRecord(
            x1=tuple(map(float, scene.x1[i])), x2=tuple(map(float, scene.x2[i])),
            M1=tuple(map(float, scene.M1[i].ravel())), M2=tuple(map(float, scene.M2[i].ravel())),
            l1=float(scene.lam1[i]), l2=float(scene.lam2[i]),
            g1=tuple(map(float, g1)), g2=tuple(map(float, g2)),
        ))
    return out


# ---------------------------------------------------------------- intrinsics


def load_intrinsics(path):
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.lineno, exc.msg) from exc
    try:
        K = np.asarray(obj["K"], dtype=float).reshape(3, 3)
        return PinholeCamera(K, obj["width"], obj["height"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(0, f"bad intrinsics file: {exc}") from exc


def save_intrinsics(camera, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"K": camera.K.tolist(), "width": camera.width, "height": camera.height}, fh)


# ---------------------------------------------------------------- depth maps


@dataclass(frozen=True, eq=False)
class DepthMap:
    values: np.ndarray  # (height, width), row-major
    scale_hint: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("depth values must be a 2D array")
        if not np.all(np.isfinite(v)):
            raise ValueError("depth values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def height(self):
        return self.values.shape[0]


def _bilinear(values, u, v):
    h, w = values.shape
    u0 = min(int(math.floor(u)), w - 2)
    v0 = min(int(math.floor(v)), h - 2)
    fu = u - u0
    fv = v - v0
    top = (1 - fu) * values[v0, u0] + fu * values[v0, u0 + 1]
    bottom = (1 - fu) * values[v0 + 1, u0] + fu * values[v0 + 1, u0 + 1]
    return (1 - fv) * top + fv * bottom


def sample_depth(depth_map, x, M=None):
    """Bilinear depth and central-difference gradient at pixel ``x``.

    The gradient is per pixel; if a frame ``M`` is given it is expressed along
    the frame axes instead (``grad @ M``).
    """
    u, v = (float(c) for c in x)
    w, h = depth_map.width, depth_map.height
    if not (1 <= u <= w - 2 and 1 <= v <= h - 2):
        raise OutOfBounds(f"pixel ({u}, {v}) outside the sampling margin of a {w}x{h} map")
    vals = depth_map.values
    lam = _bilinear(vals, u, v)
    if not lam > 0:
        raise InvalidDepth(f"non-positive depth {lam} at ({u}, {v})")
    grad = np.array([
        0.5 * (_bilinear(vals, u + 1, v) - _bilinear(vals, u - 1, v)),
        0.5 * (_bilinear(vals, u, v + 1) - _bilinear(vals, u, v - 1)),
    ])
    if M is not None:
        grad = grad @ np.asarray(M, dtype=float).reshape(2, 2)
    return DepthObservation(lam, grad)


def read_pfm(path):
    with open(path, "rb") as fh:
        kind = fh.readline().strip()
        if kind != b"Pf":
            raise ParseError(1, "only single-channel PFM ('Pf') is supported")
        try:
            w, h = (int(t) for t in fh.readline().split())
            scale = float(fh.readline().strip())
        except ValueError as exc:
            raise ParseError(2, f"bad PFM header: {exc}") from exc
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(), dtype=dtype)
    if data.size != w * h:
        raise ParseError(3, f"PFM holds {data.size} values, expected {w * h}")
    # PFM rows run bottom to top.
    return DepthMap(data.reshape(h, w)[::-1].astype(float), abs(scale))


def write_pfm(depth_map, path):
    scale = depth_map.scale_hint or 1.0
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{depth_map.width} {depth_map.height}\n{-abs(scale)}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(depth_map.values[::-1], dtype="<f4").tobytes())


def read_raw_depth(path):
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:8] != RAW_MAGIC:
            raise ParseError(1, "not a raw depth file")
        w, h = struct.unpack("<II", header[8:])
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != w * h:
        raise ParseError(1, f"raw depth holds {data.size} values, expected {w * h}")
    return DepthMap(data.reshape(h, w).astype(float))


def write_raw_depth(depth_map, path):
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC + struct.pack("<II", depth_map.width, depth_map.height))
        fh.write(np.ascontiguousarray(depth_map.values, dtype="<f4").tobytes())


def load_depth_map(path):
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head == RAW_MAGIC:
        return read_raw_depth(path)
    if head[:2] == b"Pf":
        return read_pfm(path)
    raise ParseError(1, f"unrecognized depth map format: {Path(path).name}")
