"""Space-time density grids and their file formats.

Binary layout (little-endian): the magic bytes ``QTRD``, a u32 format
version, u64 ``nz``, u64 ``nt``, the z axis and the t axis as float64,
then the values as float64 in row-major order with shape (nz, nt).
The CSV form has a header ``z/t,t0,t1,...`` and one row per z value.
"""

import csv
import enum
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

MAGIC = b"QTRD"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


class Provenance(enum.Enum):
    QUANTUM = "quantum"
    WIGNER = "wigner"


@dataclass
class SpaceTimeDensity:
    z_axis: np.ndarray
    t_axis: np.ndarray
    values: np.ndarray
    provenance: Provenance = Provenance.QUANTUM

    def __post_init__(self):
        self.z_axis = np.asarray(self.z_axis, dtype=float)
        self.t_axis = np.asarray(self.t_axis, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        for name, ax in (("z_axis", self.z_axis), ("t_axis", self.t_axis)):
            if ax.ndim != 1 or ax.size < 1 or np.any(np.diff(ax) <= 0):
                raise ValidationError(f"{name} must be a strictly increasing 1D array")
        if self.values.shape != (self.z_axis.size, self.t_axis.size):
            raise ValidationError(
                f"values shape {self.values.shape} does not match axes "
                f"({self.z_axis.size}, {self.t_axis.size})"
            )
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValidationError("density values must be finite and nonnegative")

    @property
    def shape(self):
        return self.values.shape

    def column(self, t):
        """Density profile along z at the time-axis point nearest ``t``."""
        return self.values[:, int(np.argmin(np.abs(self.t_axis - t)))]

    def row(self, z):
        return self.values[int(np.argmin(np.abs(self.z_axis - z))), :]

    def write_binary(self, path):
        nz, nt = self.shape
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, VERSION, nz, nt))
            fh.write(self.z_axis.astype("<f8").tobytes())
            fh.write(self.t_axis.astype("<f8").tobytes())
            fh.write(np.ascontiguousarray(self.values).astype("<f8").tobytes())

    @classmethod
    def read_binary(cls, path, provenance=Provenance.QUANTUM):
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) < _HEADER.size:
            raise ValidationError(f"{path}: truncated header")
        magic, version, nz, nt = _HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise ValidationError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise ValidationError(f"{path}: unsupported version {version}")
        expected = _HEADER.size + 8 * (nz + nt + nz * nt)
        if len(raw) != expected:
            raise ValidationError(f"{path}: size {len(raw)} != expected {expected}")
        data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
        z = data[:nz].copy()
        t = data[nz:nz + nt].copy()
        vals = data[nz + nt:].reshape(nz, nt).copy()
        return cls(z, t, vals, provenance)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["z/t", *(f"{t:.9g}" for t in self.t_axis)])
            for z, row in zip(self.z_axis, self.values):
                w.writerow([f"{z:.9g}", *(f"{v:.9g}" for v in row)])

    @classmethod
    def read_csv(cls, path, provenance=Provenance.QUANTUM):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0][0] != "z/t":
            raise ValidationError(f"{path}: missing z/t header")
        t = np.array(rows[0][1:], dtype=float)
        body = np.array(rows[1:], dtype=float)
        return cls(body[:, 0], t, body[:, 1:], provenance)
