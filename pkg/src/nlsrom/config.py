"""Run configuration: an INI file with one section per concern.

Two presets reproduce the plane-wave and harmonic-trap experiments::

    [mesh]      xmin, xmax, ymin, ymax, nx, ny
    [physics]   alpha, beta, kappa, potential (none | harmonic), gamma_x, gamma_y
    [initial]   kind (plane_wave | gaussian), amplitude, c1, c2, omega
    [time]      tau, T, integrator, newton_tol, newton_max_iter, jacobian
    [rom]       variant, k, threshold, m, stride, p, seed, corrected, tau, cap_dmd_rank
    [output]    directory

Empty values mean "unset".
"""
from __future__ import annotations

import configparser
import dataclasses
import io
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigurationError

ROM_VARIANTS = ("none", "pod", "pod_deim", "pod_dmd")


@dataclass
class MeshConfig:
    xmin: float = 0.0
    xmax: float = 2 * math.pi
    ymin: float = 0.0
    ymax: float = 2 * math.pi
    nx: int = 32
    ny: int = 32


@dataclass
class PhysicsConfig:
    alpha: float = 2.0
    beta: float = 2.0
    kappa: float = 10.0
    potential: str = "none"
    gamma_x: float = 0.0
    gamma_y: float = 0.0

    def potential_fn(self):
        if self.potential == "none":
            return None
        gx, gy = self.gamma_x, self.gamma_y
        return lambda x, y: 0.5 * (gx * x * x + gy * y * y)


@dataclass
class InitialConfig:
    kind: str = "plane_wave"
    amplitude: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    omega: float | None = None


@dataclass
class TimeConfig:
    tau: float = 1e-3
    T: float = 5.0
    integrator: str = "avf"
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    jacobian: str = "chord"


@dataclass
class RomConfig:
    variant: str = "none"
    k: int | None = 10
    threshold: float | None = None
    m: int = 15
    stride: int = 1
    p: int = 2
    seed: int = 20180101
    corrected: bool = True
    tau: float | None = None
    cap_dmd_rank: bool = True


@dataclass
class OutputConfig:
    directory: str = "out"


@dataclass
class RunConfig:
    mesh: MeshConfig = field(default_factory=MeshConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    rom: RomConfig = field(default_factory=RomConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        self.validate()

    @property
    def rom_tau(self) -> float:
        return self.time.tau if self.rom.tau is None else self.rom.tau

    @property
    def out_dir(self) -> Path:
        return Path(self.output.directory)

    def validate(self):
        m, ph, ic, t, r = self.mesh, self.physics, self.initial, self.time, self.rom
        for name, v in [("alpha", ph.alpha), ("beta", ph.beta), ("kappa", ph.kappa),
                        ("gamma_x", ph.gamma_x), ("gamma_y", ph.gamma_y), ("amplitude", ic.amplitude),
                        ("c1", ic.c1), ("c2", ic.c2), ("tau", t.tau), ("T", t.T),
                        ("xmin", m.xmin), ("xmax", m.xmax), ("ymin", m.ymin), ("ymax", m.ymax)]:
            if not math.isfinite(v):
                raise ConfigurationError(f"{name} must be finite, got {v}")
        if m.xmax <= m.xmin or m.ymax <= m.ymin or m.nx < 1 or m.ny < 1:
            raise ConfigurationError("invalid mesh bounds or resolution")
        if ph.potential not in ("none", "harmonic"):
            raise ConfigurationError(f"unknown potential {ph.potential!r}")
        if ic.kind not in ("plane_wave", "gaussian"):
            raise ConfigurationError(f"unknown initial condition {ic.kind!r}")
        if t.integrator not in ("avf", "backward_euler"):
            raise ConfigurationError(f"unknown integrator {t.integrator!r}")
        if t.jacobian not in ("exact", "chord"):
            raise ConfigurationError(f"unknown Jacobian strategy {t.jacobian!r}")
        if not t.tau > 0 or t.T < 0:
            raise ConfigurationError("need tau > 0 and T >= 0")
        if r.variant not in ROM_VARIANTS:
            raise ConfigurationError(f"unknown ROM variant {r.variant!r}")
        if r.k is None and r.threshold is None:
            raise ConfigurationError("the ROM needs k, threshold, or both")
        if r.stride < 1 or r.m < 1 or r.p < 0:
            raise ConfigurationError("stride and m must be >= 1 and p >= 0")
        if r.tau is not None and not r.tau > 0:
            raise ConfigurationError("ROM time step must be positive")

    # serialisation ----------------------------------------------------------

    def to_ini(self) -> str:
        cp = _parser()
        for sec in fields(self):
            obj = getattr(self, sec.name)
            cp[sec.name] = {f.name: _fmt(getattr(obj, f.name)) for f in fields(obj)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = _parser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigurationError(f"cannot parse configuration: {exc}") from exc
        parts = {}
        known = {f.name: f for f in fields(cls)}
        for name in cp.sections():
            if name not in known:
                raise ConfigurationError(f"unknown section [{name}]")
        for name, f in known.items():
            sub = f.default_factory()
            if cp.has_section(name):
                sub = _fill(sub, cp[name], name)
            parts[name] = sub
        return cls(**parts)

    @classmethod
    def load(cls, path) -> "RunConfig":
        p = Path(path)
        if not p.exists():
            if str(path) in PRESETS:
                return preset(str(path))
            raise ConfigurationError(f"{path!s} is neither a file nor a preset ({', '.join(sorted(PRESETS))})")
        return cls.from_ini(p.read_text())

    def save(self, path):
        Path(path).write_text(self.to_ini())

    def override(self, assignments) -> "RunConfig":
        """Apply ``section.key=value`` strings."""
        text = self.to_ini()
        cp = _parser()
        cp.read_string(text)
        for a in assignments:
            key, sep, value = a.partition("=")
            sec, dot, opt = key.strip().partition(".")
            if not sep or not dot or not cp.has_section(sec):
                raise ConfigurationError(f"bad override {a!r}; expected section.key=value")
            cp[sec][opt] = value.strip()
        buf = io.StringIO()
        cp.write(buf)
        return RunConfig.from_ini(buf.getvalue())

    def replace(self, **sections) -> "RunConfig":
        parts = {f.name: getattr(self, f.name) for f in fields(self)}
        for sec, changes in sections.items():
            parts[sec] = dataclasses.replace(parts[sec], **changes)
        return RunConfig(**parts)


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys are case sensitive (``T``)
    return cp


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _fill(obj, section, name):
    kw = {}
    types = {f.name: f.type for f in fields(obj)}
    for key, raw in section.items():
        if key not in types:
            raise ConfigurationError(f"unknown key {key!r} in [{name}]")
        kw[key] = _parse(raw, types[key], f"{name}.{key}")
    return dataclasses.replace(obj, **kw)


def _parse(raw: str, typ: str, where: str):
    raw = raw.strip()
    optional = "None" in typ
    if raw == "":
        if optional:
            return None
        raise ConfigurationError(f"{where} must not be empty")
    try:
        if typ.startswith("bool"):
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        if typ.startswith("int"):
            return int(raw)
        if typ.startswith("float"):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigurationError(f"{where}: cannot parse {raw!r} as {typ}") from exc


def example1() -> RunConfig:
    """Plane wave on the periodic box ``[0, 2 pi]^2``."""
    return RunConfig(
        MeshConfig(0.0, 2 * math.pi, 0.0, 2 * math.pi, 32, 32),
        PhysicsConfig(alpha=2.0, beta=2.0),
        InitialConfig("plane_wave", 1.0, 1.0, 1.0, None),
        TimeConfig(tau=1e-3, T=5.0),
        RomConfig(variant="pod_deim", k=10, threshold=None, m=15),
        OutputConfig("out/example1"),
    )


def example2() -> RunConfig:
    """Gaussian in the harmonic trap ``V = (x^2 + 4 y^2) / 2`` on ``[-8, 8]^2``."""
    return RunConfig(
        MeshConfig(-8.0, 8.0, -8.0, 8.0, 32, 32),
        PhysicsConfig(alpha=0.5, beta=1.0, potential="harmonic", gamma_x=1.0, gamma_y=4.0),
        InitialConfig("gaussian"),
        TimeConfig(tau=1e-2, T=3.0),
        RomConfig(variant="pod_deim", k=20, threshold=None, m=20),
        OutputConfig("out/example2"),
    )


PRESETS = {"example1": example1, "example2": example2}


def preset(name: str) -> RunConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
