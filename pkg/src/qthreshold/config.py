"""Run configuration with a flat INI representation.

Every field lives in exactly one section. Optional fields are written as
``auto`` when unset, so a resolved configuration always lists every key and
can be fed back unchanged.
"""

import configparser
import dataclasses
import io
import math
from dataclasses import dataclass, field

from .errors import ValidationError

AUTO = "auto"


def _f(section, default, **kw):
    return field(default=default, metadata={"section": section, **kw})


@dataclass(frozen=True)
class RunConfig:
    # Morse potential and units
    V: float = _f("morse", 1.0)
    d: float = _f("morse", 1.0, positive=True)
    z0: float = _f("morse", 0.0)
    m: float = _f("morse", 1.0, positive=True)
    hbar: float = _f("morse", 1.0, positive=True)
    # initial coherent state; y is the detector position (auto = 2 z_i)
    p_i: float = _f("state", 1.0, positive=True)
    z_i: float = _f("state", 100.0)
    gamma: float = _f("state", 1e-2, positive=True)
    y: float = _f("state", None, optional=True)
    # quadrature and output grids; t_max auto = 2.2 free-flight times
    n_k: int = _f("grid", 50_000, positive=True)
    nz: int = _f("grid", 2000, positive=True)
    nt: int = _f("grid", 2000, positive=True)
    t_max: float = _f("grid", None, optional=True, positive=True)
    n_t_flight: int = _f("grid", 4001, positive=True)
    check_convergence: bool = _f("grid", False)
    spot_check: bool = _f("grid", True)
    # classical ensemble
    n_traj: int = _f("ensemble", 10_000_000, positive=True)
    seed: int = _f("ensemble", 0)
    engine: str = _f("ensemble", "analytic")
    energy_tolerance: float = _f("ensemble", 1e-9, positive=True)
    control_variate: bool = _f("ensemble", True)
    # execution
    out_dir: str = _f("run", "out")
    threads: int = _f("run", None, optional=True, positive=True)
    verbosity: int = _f("run", 0)

    def __post_init__(self):
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            if val is None:
                if not f.metadata.get("optional"):
                    raise ValidationError(f"{f.name}: a value is required")
                continue
            if f.type in (float, int) and not isinstance(val, bool):
                if not math.isfinite(val):
                    raise ValidationError(f"{f.name}: must be finite, got {val}")
                if f.metadata.get("positive") and not val > 0:
                    raise ValidationError(f"{f.name}: must be positive, got {val}")
        if not self.V >= 0:
            raise ValidationError(f"V: must be nonnegative, got {self.V}")
        if self.seed < 0:
            raise ValidationError(f"seed: must be nonnegative, got {self.seed}")
        if self.n_traj < 1000:
            raise ValidationError(f"n_traj: must be at least 1000, got {self.n_traj}")
        if self.engine not in ("analytic", "integrate"):
            raise ValidationError(f"engine: unknown value {self.engine!r}")
        if self.nz < 2 or self.nt < 2 or self.n_k < 2:
            raise ValidationError("nz, nt and n_k need at least two points")

    @property
    def detector(self):
        return 2.0 * self.z_i if self.y is None else self.y

    def replace(self, **changes):
        return with_overrides(self, changes)

    def to_ini(self):
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for f in dataclasses.fields(self):
            sec = f.metadata["section"]
            if not cp.has_section(sec):
                cp.add_section(sec)
            cp.set(sec, f.name, _format(getattr(self, f.name)))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def write(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_ini())

    @classmethod
    def from_ini(cls, text, base=None):
        """Parse INI text; keys not given keep the value from ``base``."""
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ValidationError(f"malformed config: {exc}") from None
        sections = {f.name: f.metadata["section"] for f in dataclasses.fields(cls)}
        changes = {}
        for sec in cp.sections():
            for key, raw in cp.items(sec):
                if key not in sections:
                    raise ValidationError(f"unknown key {key!r} in section [{sec}]")
                if sections[key] != sec:
                    raise ValidationError(
                        f"key {key!r} belongs in section [{sections[key]}], not [{sec}]"
                    )
                changes[key] = raw
        return with_overrides(base or cls(), changes)

    @classmethod
    def read(cls, path, base=None):
        with open(path) as fh:
            return cls.from_ini(fh.read(), base)


def _format(val):
    if val is None:
        return AUTO
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, float):
        return repr(val)
    return str(val)


def _parse(f, raw):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if text.lower() == AUTO and f.metadata.get("optional"):
        return None
    try:
        if f.type is bool:
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if f.type is int:
            try:
                return int(text)
            except ValueError:
                pass
            # exponent notation such as 2e5
            num = float(text)
            if num != int(num):
                raise ValueError(text)
            return int(num)
        if f.type is float:
            return float(text)
    except ValueError:
        raise ValidationError(f"{f.name}: cannot parse {raw!r} as {f.type.__name__}") from None
    return text


def with_overrides(cfg, changes):
    """Return ``cfg`` with ``changes`` (strings or typed values) applied."""
    known = {f.name: f for f in dataclasses.fields(cfg)}
    parsed = {}
    for key, raw in changes.items():
        if key not in known:
            raise ValidationError(f"unknown key {key!r}")
        parsed[key] = _parse(known[key], raw)
    return dataclasses.replace(cfg, **parsed)
