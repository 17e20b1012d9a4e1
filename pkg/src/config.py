"""
Run configuration: TOML files parsed into frozen dataclasses.

Every section rejects unknown keys and invalid values with a ConfigError
naming the dotted key, before any computation starts.
"""

import logging
import math
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from .errors import ConfigError, GaborSectionsError
from .pointsets import LatticeSpec, PointSet
from .weights import WeightSpec
from .windows import WindowSpec

logger = logging.getLogger(__name__)

THREADS_ENV = "GABOR_SECTIONS_THREADS"
INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class RunSection:
    workers: int = 0          # 0: one per available core
    seed: int = 0
    max_points: int = 20_000

    def validate(self) -> None:
        if self.workers < 0:
            raise ConfigError("run.workers", "must be >= 0")
        if self.max_points < 1:
            raise ConfigError("run.max_points", "must be positive")


@dataclass(frozen=True)
class WindowSection:
    kind: str = "gaussian"
    d: int = 1
    normalized: bool = False
    file: str = ""            # sampled windows: CSV with t,re,im
    lo: float = -6.0          # sampled windows without a file: sampled Gaussian
    hi: float = 6.0
    step: float = 1.0 / 64.0

    def validate(self) -> None:
        if self.kind not in ("gaussian", "sampled"):
            raise ConfigError("window.kind", f"expected 'gaussian' or 'sampled', got {self.kind!r}")
        if self.d < 1:
            raise ConfigError("window.d", "must be positive")
        if self.kind == "sampled":
            if self.d != 1:
                raise ConfigError("window.d", "sampled windows are one-dimensional")
            if not self.file and not (self.step > 0 and self.hi > self.lo):
                raise ConfigError("window.step", "need step > 0 and hi > lo")

    def build(self, base: Path) -> WindowSpec:
        if self.kind == "gaussian":
            return WindowSpec.gaussian(self.d, self.normalized)
        if self.file:
            return WindowSpec.from_csv(base / self.file, normalized=self.normalized)
        return WindowSpec.sampled_gaussian(self.lo, self.hi, self.step, normalized=self.normalized)


@dataclass(frozen=True)
class LatticeSection:
    d: int = 1
    generator: Tuple[float, ...] = (INV_SQRT2, 0.0, 0.0, INV_SQRT2)   # row-major
    points_file: str = ""     # explicit cloud instead of a lattice

    def validate(self) -> None:
        if self.d < 1:
            raise ConfigError("lattice.d", "must be positive")
        if not self.points_file and len(self.generator) != (2 * self.d) ** 2:
            raise ConfigError("lattice.generator", f"needs {(2 * self.d) ** 2} entries for d={self.d}")

    def build(self) -> LatticeSpec:
        try:
            return LatticeSpec(list(self.generator), self.d)
        except GaborSectionsError as exc:
            raise ConfigError("lattice.generator", str(exc)) from exc


@dataclass(frozen=True)
class WeightSection:
    kind: str = "subexponential"
    s: float = 0.0
    a: float = 1.0
    b: float = 0.5

    def validate(self) -> None:
        self.build()

    def build(self) -> WeightSpec:
        try:
            if self.kind == "polynomial":
                return WeightSpec.polynomial(self.s)
            if self.kind == "subexponential":
                return WeightSpec.subexponential(self.a, self.b)
            if self.kind == "exponential":
                return WeightSpec.exponential(self.a)
            if self.kind == "constant":
                return WeightSpec.constant()
        except GaborSectionsError as exc:
            raise ConfigError(f"weight.{self._offending_key()}", str(exc)) from exc
        raise ConfigError("weight.kind", f"unknown weight kind {self.kind!r}")

    def _offending_key(self) -> str:
        if self.kind == "polynomial":
            return "s"
        if self.kind == "subexponential" and self.a > 0:
            return "b"
        return "a"


@dataclass(frozen=True)
class SweepSection:
    radii: Tuple[float, ...] = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)

    def validate(self) -> None:
        if not self.radii:
            raise ConfigError("sweep.radii", "must not be empty")
        for r in self.radii:
            if not math.isfinite(r) or r < 0:
                raise ConfigError("sweep.radii", f"radius {r} must be finite and nonnegative")
        if any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise ConfigError("sweep.radii", "must be strictly ascending")


@dataclass(frozen=True)
class BoundsSection:
    r_max: float = 20.0

    def validate(self) -> None:
        if not self.r_max > 0:
            raise ConfigError("bounds.r_max", "must be positive")


GAP_MODES = ("threshold", "widest", "floor")


@dataclass(frozen=True)
class GapSection:
    mode: str = "threshold"         # "threshold", "widest" or "floor"
    threshold: float = 1e-4         # relative to the largest eigenvalue
    lower: float = 1e-6             # widest mode search window, relative
    upper: float = 1.0
    min_ratio: float = 10.0

    def validate(self) -> None:
        if self.mode not in GAP_MODES:
            raise ConfigError("gap.mode", f"expected one of {', '.join(GAP_MODES)}, got {self.mode!r}")
        if not self.threshold > 0:
            raise ConfigError("gap.threshold", "must be positive")
        if not 0 < self.lower < self.upper:
            raise ConfigError("gap.lower", "need 0 < lower < upper")
        if not self.min_ratio >= 10:
            raise ConfigError("gap.min_ratio", "must be at least 10 (decade separation)")


@dataclass(frozen=True)
class ContourSection:
    radius: float = 0.0             # 0: derived from the gap
    nodes: int = 64

    def validate(self) -> None:
        if self.radius < 0:
            raise ConfigError("contour.radius", "must be >= 0")
        if self.nodes < 16:
            raise ConfigError("contour.nodes", "must be >= 16")


@dataclass(frozen=True)
class KernelSection:
    radius: float = 0.0             # 0: largest sweep radius
    anchor: str = "origin"          # "origin" or "argmax"
    projection: str = "contour"     # "contour" or "eigen"
    lemma_radii: Tuple[float, ...] = (1.5, 2.0, 2.5)
    resolvent_radii: Tuple[float, ...] = (3.0, 4.0)

    def validate(self) -> None:
        if self.radius < 0:
            raise ConfigError("kernel.radius", "must be >= 0")
        if self.anchor not in ("origin", "argmax"):
            raise ConfigError("kernel.anchor", f"expected 'origin' or 'argmax', got {self.anchor!r}")
        if self.projection not in ("contour", "eigen"):
            raise ConfigError("kernel.projection", f"expected 'contour' or 'eigen', got {self.projection!r}")
        if any(r < 0 for r in self.lemma_radii):
            raise ConfigError("kernel.lemma_radii", "radii must be nonnegative")


@dataclass(frozen=True)
class FitSection:
    models: Tuple[str, ...] = ("power", "stretched", "gaussian")
    b: float = 0.5

    def validate(self) -> None:
        for model in self.models:
            if model not in ("power", "stretched", "gaussian"):
                raise ConfigError("fit.models", f"unknown model {model!r}")
        if not 0 < self.b < 1:
            raise ConfigError("fit.b", "must lie in (0, 1)")


@dataclass(frozen=True)
class OutputSection:
    dir: str = "out"
    plot: bool = False
    csv_dir: str = ""

    def validate(self) -> None:
        if not self.dir:
            raise ConfigError("output.dir", "must not be empty")


SECTIONS = {
    "run": RunSection,
    "window": WindowSection,
    "lattice": LatticeSection,
    "weight": WeightSection,
    "sweep": SweepSection,
    "bounds": BoundsSection,
    "gap": GapSection,
    "contour": ContourSection,
    "kernel": KernelSection,
    "fit": FitSection,
    "output": OutputSection,
}


def _coerce(key: str, value: Any, default: Any) -> Any:
    """Check `value` against the type of the section default"""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigError(key, f"expected a list, got {value!r}")
        template = default[0] if default else 0.0
        return tuple(_coerce(key, item, template) for item in value)
    return value


def _section_from_dict(name: str, data: Any):
    cls = SECTIONS[name]
    if not isinstance(data, dict):
        raise ConfigError(name, "expected a table")
    defaults = cls()
    known = {f.name for f in fields(cls)}
    values = {}
    for key, value in data.items():
        dotted = f"{name}.{key}"
        if key not in known:
            raise ConfigError(dotted, "unknown key")
        values[key] = _coerce(dotted, value, getattr(defaults, key))
    section = replace(defaults, **values)
    section.validate()
    return section


@dataclass(frozen=True)
class RunConfig:
    """A fully-defaulted, validated run description"""
    run: RunSection = field(default_factory=RunSection)
    window: WindowSection = field(default_factory=WindowSection)
    lattice: LatticeSection = field(default_factory=LatticeSection)
    weight: WeightSection = field(default_factory=WeightSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    bounds: BoundsSection = field(default_factory=BoundsSection)
    gap: GapSection = field(default_factory=GapSection)
    contour: ContourSection = field(default_factory=ContourSection)
    kernel: KernelSection = field(default_factory=KernelSection)
    fit: FitSection = field(default_factory=FitSection)
    output: OutputSection = field(default_factory=OutputSection)
    base_dir: str = "."

    @classmethod
    def defaults(cls) -> 'RunConfig':
        """Gaussian window on (1/sqrt 2) Z^2, sub-exponential weight"""
        return cls()

    @classmethod
    def critical(cls) -> 'RunConfig':
        """Gaussian window on Z^2 (critical density, no frame)"""
        return cls(lattice=LatticeSection(generator=(1.0, 0.0, 0.0, 1.0)))

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: str = ".") -> 'RunConfig':
        sections = {}
        for name, value in data.items():
            if name not in SECTIONS:
                raise ConfigError(name, "unknown section")
            sections[name] = _section_from_dict(name, value)
        config = cls(**sections, base_dir=base_dir)
        config.validate()
        return config

    @classmethod
    def from_toml(cls, path) -> 'RunConfig':
        path = Path(path)
        try:
            with open(path, "rb") as handle:
                data = tomllib.load(handle)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("config", f"{path}: {exc}") from exc
        # relative file names inside the config resolve against the working directory
        return cls.from_dict(data)

    def validate(self) -> None:
        for name in SECTIONS:
            getattr(self, name).validate()
        top = self.sweep.radii[-1]
        if self.bounds.r_max <= top:
            raise ConfigError("bounds.r_max", f"must exceed the largest sweep radius {top}")
        if self.kernel.radius > 0 and any(r >= self.kernel.radius for r in self.kernel.lemma_radii):
            raise ConfigError("kernel.lemma_radii", "must lie below kernel.radius")

    # --- derived objects ---

    @property
    def base(self) -> Path:
        return Path(self.base_dir)

    def window_spec(self) -> WindowSpec:
        return self.window.build(self.base)

    def weight_spec(self) -> WeightSpec:
        return self.weight.build()

    def lattice_spec(self) -> Optional[LatticeSpec]:
        return None if self.lattice.points_file else self.lattice.build()

    def point_cloud(self, n: float) -> PointSet:
        return PointSet.from_csv(self.base / self.lattice.points_file, n)

    @property
    def kernel_radius(self) -> float:
        return self.kernel.radius if self.kernel.radius > 0 else self.sweep.radii[-1]

    def to_dict(self) -> Dict[str, Any]:
        out = {}
        for name in SECTIONS:
            section = asdict(getattr(self, name))
            out[name] = {key: list(value) if isinstance(value, tuple) else value
                         for key, value in section.items()}
        return out

    def echo(self) -> Dict[str, Any]:
        """Configuration as echoed into reports (worker count and output paths excluded)"""
        data = self.to_dict()
        data.pop("output")
        data["run"] = {key: value for key, value in data["run"].items() if key != "workers"}
        return data

    def to_toml(self) -> str:
        lines = []
        for name, section in self.to_dict().items():
            lines.append(f"[{name}]")
            for key, value in section.items():
                lines.append(f"{key} = {_toml_value(value)}")
            lines.append("")
        return "\n".join(lines)


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, list):
        return "[" + ", ".join(_toml_value(item) for item in value) + "]"
    raise TypeError(f"cannot render {value!r} as TOML")


def resolve_workers(config: RunConfig, override: Optional[int] = None) -> int:
    """[run] workers < --workers < GABOR_SECTIONS_THREADS; 0 means one per core"""
    workers = config.run.workers
    if override is not None:
        workers = override
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            workers = int(env)
        except ValueError as exc:
            raise ConfigError(THREADS_ENV, f"expected an integer, got {env!r}") from exc
        if workers < 0:
            raise ConfigError(THREADS_ENV, "must be >= 0")
    if workers == 0:
        workers = os.cpu_count() or 1
    return workers
