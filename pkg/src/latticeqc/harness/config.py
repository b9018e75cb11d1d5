"""Case configuration: a TOML document validated by pydantic.

Coordinates (notch, full-resolution rectangles, point selectors) are in mm.
``mesh.element_size`` is in multiples of the strut length. Unknown keys are
rejected at every level.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..exceptions import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1
Rect = Tuple[float, float, float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LatticeSpec(_Strict):
    kind: Literal["square", "triangular"]
    width: int = Field(gt=0, description="cells along x (triangular: nodes per even row minus one)")
    height: int = Field(gt=0, description="cells along y (square) or node rows (triangular)")
    spacing: float = Field(10.0, gt=0, description="strut length l0 in mm")
    bracing: Literal["none", "x_braced"] = "x_braced"
    orientation: Literal["rows", "columns"] = "rows"
    notch: Optional[Rect] = None


class MaterialSpec(_Strict):
    young_modulus: float = Field(70e3, gt=0)
    yield_stress: float = Field(134.0, gt=0)
    cross_section: float = Field(1.0, gt=0)


class MeshSpec(_Strict):
    element_size: Optional[float] = Field(None, gt=0)
    full_resolution: List[Rect] = []

    @field_validator("full_resolution")
    @classmethod
    def _rects(cls, rects):
        for r in rects:
            if not (r[2] > r[0] and r[3] > r[1]):
                raise ValueError(f"degenerate rectangle {r}")
        return rects


class SamplingSpec(_Strict):
    scheme: Literal["fs", "ess", "iss", "nas", "nss"] = "iss"
    psn_selection: Literal["spread", "perturbed"] = "spread"


class BCSpec(_Strict):
    where: str = Field(description="boundary set name or 'point'")
    at: Optional[Tuple[float, float]] = None
    axis: Literal["x", "y", "xy"]
    value: float = 0.0
    loaded: bool = False

    @model_validator(mode="after")
    def _point(self):
        if (self.where == "point") != (self.at is not None):
            raise ValueError("'at' is required exactly when where = 'point'")
        if self.loaded and self.axis == "xy":
            raise ValueError("a loaded constraint acts on a single axis")
        return self


class LoadingSpec(_Strict):
    mode: Literal["static", "fracture"] = "static"
    steps: int = Field(100, ge=1)
    removal: Literal["single", "batch"] = "single"


class SolverSpec(_Strict):
    tol: float = Field(1e-10, gt=0, lt=1)


class ReferenceSpec(_Strict):
    mode: Literal["fr", "fs", "none"] = "fr"


class OutputSpec(_Strict):
    dir: str = "out"
    field: bool = True
    curve: bool = True
    summary: bool = True
    vtk: bool = False


class SuiteSpec(_Strict):
    sizes: List[float] = []
    schemes: List[Literal["fs", "ess", "iss", "nas", "nss"]] = []


class CaseConfig(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    name: str
    description: str = ""
    seed: int = 0
    lattice: LatticeSpec
    material: MaterialSpec = MaterialSpec()
    mesh: MeshSpec = MeshSpec()
    sampling: SamplingSpec = SamplingSpec()
    bc: List[BCSpec]
    loading: LoadingSpec = LoadingSpec()
    solver: SolverSpec = SolverSpec()
    reference: ReferenceSpec = ReferenceSpec()
    output: OutputSpec = OutputSpec()
    suite: SuiteSpec = SuiteSpec()

    @model_validator(mode="after")
    def _loaded(self):
        n = sum(b.loaded for b in self.bc)
        if self.loading.mode == "fracture" and n != 1:
            raise ValueError("fracture runs need exactly one constraint with loaded = true")
        if n > 1:
            raise ValueError("at most one constraint may be loaded")
        return self

    def with_overrides(self, scheme=None, reference=None, out=None, element_size=None) -> "CaseConfig":
        """Copy with command-line overrides applied (and re-validated)."""
        data = self.model_dump()
        if scheme is not None:
            data["sampling"]["scheme"] = scheme
        if reference is not None:
            data["reference"]["mode"] = reference
        if out is not None:
            data["output"]["dir"] = str(out)
        if element_size is not None:
            data["mesh"]["element_size"] = element_size
        return parse_config(data)


def parse_config(data: dict) -> CaseConfig:
    try:
        return CaseConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def loads_config(text: str) -> CaseConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from exc
    return parse_config(data)


def load_config(path) -> CaseConfig:
    """Read a TOML file, or a bundled preset when ``path`` names one."""
    from .presets import preset_path

    p = Path(path)
    if not p.exists():
        found = preset_path(str(path))
        if found is None:
            raise ConfigError(f"no such config file or preset: {path}")
        p = found
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from exc
    return loads_config(text)


def config_schema() -> dict:
    return CaseConfig.model_json_schema()
