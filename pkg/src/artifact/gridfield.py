"""Sampled functions on uniform ``(s, t)`` rectangles and their derivative bundles.

File format
-----------
A GridField file is one ASCII header line followed by raw little-endian
float64 data::

    # GRIDFIELD v1 {"name": ..., "ns": ..., "nt": ..., "ds": ..., "dt": ...,
                    "derivatives": [...], "config_hash": ...}\\n
    <s axis, ns doubles> <t axis, nt doubles>
    <values, ns*nt doubles, row-major with s as the slow index>
    <one ns*nt block per listed derivative, in the listed order>

The axes are stored as data, so a load reproduces the grid bit-exactly; the
header spacings are informational.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from artifact.numerics import derivative, edge_band

MAGIC = "# GRIDFIELD v1 "
BUNDLE_KEYS = ("s", "t", "ss", "st", "tt")


@dataclass(frozen=True)
class DerivativeBundle:
    """A function ``V(s, t)`` together with its first and second partials on a grid."""

    V: np.ndarray
    V_s: np.ndarray
    V_t: np.ndarray
    V_ss: np.ndarray
    V_st: np.ndarray
    V_tt: np.ndarray

    def derivs(self) -> dict[str, np.ndarray]:
        return {"s": self.V_s, "t": self.V_t, "ss": self.V_ss, "st": self.V_st, "tt": self.V_tt}

    def __add__(self, other: "DerivativeBundle") -> "DerivativeBundle":
        return DerivativeBundle(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))

    def scaled(self, factor: float) -> "DerivativeBundle":
        return DerivativeBundle(*(factor * a for a in self.as_tuple()))

    def as_tuple(self) -> tuple[np.ndarray, ...]:
        return (self.V, self.V_s, self.V_t, self.V_ss, self.V_st, self.V_tt)


@dataclass(frozen=True)
class GridField:
    """Samples ``values[i, j] = f(s[i], t[j])`` on a uniform rectangle.

    ``derivs`` optionally caches exact partials (keys ``s, t, ss, st, tt``);
    when absent, :meth:`bundle` falls back to central differences.
    """

    s: np.ndarray
    t: np.ndarray
    values: np.ndarray
    name: str = "field"
    derivs: dict[str, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.values.shape != (len(self.s), len(self.t)):
            raise ValueError("values shape does not match the grid axes")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"non-finite samples in grid field {self.name!r}")
        if len(self.s) > 1 and self.ds <= 0 or len(self.t) > 1 and self.dt <= 0:
            raise ValueError("grid spacings must be positive")

    @property
    def ds(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @classmethod
    def from_bundle(cls, bundle: DerivativeBundle, s, t, name: str = "field") -> "GridField":
        return cls(np.asarray(s, dtype=float), np.asarray(t, dtype=float), bundle.V, name, bundle.derivs())

    def with_values(self, values, name: str | None = None) -> "GridField":
        return GridField(self.s, self.t, np.asarray(values, dtype=float), name or self.name)

    def bundle(self, accuracy: int = 4) -> DerivativeBundle:
        """Cached exact partials when available, else finite differences of ``values``."""
        if self.derivs is not None:
            d = self.derivs
            return DerivativeBundle(self.values, d["s"], d["t"], d["ss"], d["st"], d["tt"])
        v = self.values
        v_s = derivative(v, self.ds, 1, accuracy, axis=0)
        v_t = derivative(v, self.dt, 1, accuracy, axis=1)
        return DerivativeBundle(
            V=v, V_s=v_s, V_t=v_t,
            V_ss=derivative(v, self.ds, 2, accuracy, axis=0),
            V_st=derivative(v_s, self.dt, 1, accuracy, axis=1),
            V_tt=derivative(v, self.dt, 2, accuracy, axis=1),
        )

    def interior(self, band: int | None = None) -> tuple[slice, slice]:
        """Index window that excludes the finite-difference edge bands."""
        b = edge_band(4) if band is None else band
        return slice(b, len(self.s) - b), slice(b, len(self.t) - b)

    def sup(self, band: int = 0) -> float:
        if band == 0:
            return float(np.max(np.abs(self.values)))
        i, j = self.interior(band)
        return float(np.max(np.abs(self.values[i, j])))

    def save(self, path, config_hash: str = "") -> Path:
        path = Path(path)
        keys = [k for k in BUNDLE_KEYS if self.derivs is not None and k in self.derivs]
        header = {
            "name": self.name,
            "ns": len(self.s), "nt": len(self.t),
            "ds": repr(self.ds if len(self.s) > 1 else 0.0), "dt": repr(self.dt if len(self.t) > 1 else 0.0),
            "derivatives": keys,
            "config_hash": config_hash,
        }
        with path.open("wb") as fh:
            fh.write((MAGIC + json.dumps(header, sort_keys=True) + "\n").encode("ascii"))
            for arr in (self.s, self.t, self.values):
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
            for k in keys:
                fh.write(np.ascontiguousarray(self.derivs[k], dtype="<f8").tobytes())
        return path

    @classmethod
    def load(cls, path) -> "GridField":
        raw = Path(path).read_bytes()
        end = raw.index(b"\n")
        line = raw[:end].decode("ascii")
        if not line.startswith(MAGIC):
            raise ValueError(f"{path}: not a GridField file")
        meta = json.loads(line[len(MAGIC):])
        ns, nt = int(meta["ns"]), int(meta["nt"])
        data = np.frombuffer(raw[end + 1:], dtype="<f8")
        blocks = 1 + len(meta["derivatives"])
        if data.size != ns + nt + blocks * ns * nt:
            raise ValueError(f"{path}: expected {ns + nt + blocks * ns * nt} doubles, found {data.size}")
        s, t = data[:ns].astype(float), data[ns:ns + nt].astype(float)
        data = data[ns + nt:].reshape(blocks, ns, nt).astype(float)
        derivs = {k: data[i + 1] for i, k in enumerate(meta["derivatives"])} or None
        return cls(s, t, data[0].copy(), meta["name"], derivs)

    def same_as(self, other: "GridField") -> bool:
        """Bit-exact comparison of axes, values and cached derivatives."""
        if self.name != other.name or self.shape != other.shape:
            return False
        if not (np.array_equal(self.s, other.s) and np.array_equal(self.t, other.t)
                and np.array_equal(self.values, other.values)):
            return False
        mine, theirs = self.derivs or {}, other.derivs or {}
        return mine.keys() == theirs.keys() and all(np.array_equal(mine[k], theirs[k]) for k in mine)


def read_header(path) -> dict:
    """The JSON header of a GridField file."""
    with Path(path).open("rb") as fh:
        line = fh.readline().decode("ascii")
    return json.loads(line[len(MAGIC):])
