"""
Configuration for divmeasure.
Process-wide defaults come from environment variables (.env supported);
per-experiment settings come from ini files parsed into pydantic models.
"""
import configparser
import json
import os
import re

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator

from .errors import ConfigError

# Load environment variables from .env file
load_dotenv()

# h and the epsilon schedule for each --resolution preset
RESOLUTIONS = {
    "coarse": {"spacing": 1 / 64, "eps": [0.4, 0.2, 0.1]},
    "reference": {"spacing": 1 / 256, "eps": [0.2, 0.1, 0.05]},
    "fine": {"spacing": 1 / 512, "eps": [0.1, 0.05, 0.025]},
}


class Config:
    OUTPUT_DIR = os.getenv("DIVMEASURE_OUTPUT_DIR", "results")
    RESOLUTION = os.getenv("DIVMEASURE_RESOLUTION", "reference")
    SEED = int(os.getenv("DIVMEASURE_SEED", 0))
    LOG_LEVEL = os.getenv("DIVMEASURE_LOG_LEVEL", "INFO").upper()

    # Executor threads used by `all`; 1 keeps every run single-threaded
    WORKERS = int(os.getenv("DIVMEASURE_WORKERS", 1))

    def validate(self):
        if self.RESOLUTION not in RESOLUTIONS:
            raise ConfigError(
                f"unknown resolution {self.RESOLUTION!r}; choose one of {sorted(RESOLUTIONS)}",
                field="DIVMEASURE_RESOLUTION",
            )
        if self.WORKERS < 1:
            raise ConfigError("DIVMEASURE_WORKERS must be >= 1", field="DIVMEASURE_WORKERS")
        if self.LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ConfigError(f"bad log level {self.LOG_LEVEL!r}", field="DIVMEASURE_LOG_LEVEL")


# --- Experiment config sections ---

class GridSection(BaseModel):
    lo: list[float] = Field(default_factory=lambda: [-2.0, -2.0])
    hi: list[float] = Field(default_factory=lambda: [2.0, 2.0])
    spacing: float = 1 / 256

    @field_validator("spacing")
    @classmethod
    def _positive(cls, v):
        if v <= 0:
            raise ValueError("spacing must be positive")
        return v

    def to_grid(self):
        from .grid import GridSpec
        if len(self.lo) != len(self.hi):
            raise ConfigError("lo and hi differ in length", section="grid", field="lo")
        return GridSpec.from_bounds(self.lo, self.hi, self.spacing)


class ShapeSection(BaseModel):
    name: str = "disk"

    @field_validator("name")
    @classmethod
    def _known(cls, v):
        from .corpus import build_shape
        build_shape(v)
        return v

    def to_shape(self):
        from .corpus import build_shape
        return build_shape(self.name)


class FieldSection(BaseModel):
    name: str = "linear"

    @field_validator("name")
    @classmethod
    def _known(cls, v):
        from .corpus import check_field_name
        check_field_name(v)
        return v


class ScheduleSection(BaseModel):
    eps: list[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05])
    kernel: str = "smooth_bump"
    levels_per_band: int = 8
    delta_t: float = 0.05
    coarea_levels: int = 32

    @field_validator("eps")
    @classmethod
    def _decreasing(cls, v):
        if len(v) < 1 or any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("eps must be a non-empty strictly decreasing list")
        return v

    @field_validator("kernel")
    @classmethod
    def _kernel_kind(cls, v):
        if v not in ("smooth_bump", "plateau"):
            raise ValueError("kernel must be smooth_bump or plateau")
        return v

    @field_validator("levels_per_band")
    @classmethod
    def _levels(cls, v):
        if v < 4:
            raise ValueError("levels_per_band must be >= 4")
        return v


class FatnessSection(BaseModel):
    c0: float = 0.4
    r0: float = 0.25


class FluxSection(BaseModel):
    lattice_factor: int = 16
    n_slices: int = 8
    table: str = ""
    c_bound: float = -1.0  # negative: use the field's sup bound
    # axiom (ii) allowance, relative to sup_bound * Per(E); covers trace discretization
    slack: float = 0.02


class ConservationSection(BaseModel):
    flux: str = "burgers"
    u_left: float = 1.0
    u_right: float = 0.0
    t_final: float = 1.0
    spacing: float = 1 / 512
    eps: list[float] = Field(default_factory=lambda: [0.05, 0.025, 0.0125])

    @field_validator("flux")
    @classmethod
    def _flux_name(cls, v):
        if v != "burgers":
            raise ValueError("only the burgers flux is registered")
        return v


class OutputSection(BaseModel):
    directory: str = "results"


SECTIONS = {
    "grid": GridSection,
    "shape": ShapeSection,
    "field": FieldSection,
    "schedule": ScheduleSection,
    "fatness": FatnessSection,
    "flux": FluxSection,
    "conservation": ConservationSection,
    "output": OutputSection,
}


class ExperimentConfig(BaseModel):
    grid: GridSection = Field(default_factory=GridSection)
    shape: ShapeSection = Field(default_factory=ShapeSection)
    field: FieldSection = Field(default_factory=FieldSection)
    schedule: ScheduleSection = Field(default_factory=ScheduleSection)
    fatness: FatnessSection = Field(default_factory=FatnessSection)
    flux: FluxSection = Field(default_factory=FluxSection)
    conservation: ConservationSection = Field(default_factory=ConservationSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @classmethod
    def from_file(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from e
        return cls.from_text(text)

    @classmethod
    def from_text(cls, text):
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as e:
            raise ConfigError(str(e).splitlines()[0], line=getattr(e, "lineno", None)) from e

        sections = {}
        for name in parser.sections():
            if name not in SECTIONS:
                raise ConfigError("unknown section", section=name, line=_line_of(text, name))
            model = SECTIONS[name]
            raw = {}
            for key, value in parser.items(name):
                if key not in model.model_fields:
                    raise ConfigError("unknown key", section=name, field=key,
                                      line=_line_of(text, name, key))
                raw[key] = _parse_value(value, model.model_fields[key].annotation)
            try:
                sections[name] = model(**raw)
            except ValidationError as e:
                err = e.errors()[0]
                key = str(err["loc"][0]) if err["loc"] else None
                raise ConfigError(err["msg"], section=name, field=key,
                                  line=_line_of(text, name, key)) from e
            except ConfigError as e:
                raise ConfigError(str(e), section=name, line=_line_of(text, name)) from e
        return cls(**sections)

    def to_ini(self):
        lines = []
        for name in SECTIONS:
            section = getattr(self, name)
            lines.append(f"[{name}]")
            for key, value in section.model_dump().items():
                if isinstance(value, list):
                    value = ", ".join(repr(float(v)) for v in value)
                elif isinstance(value, float):
                    value = repr(value)
                lines.append(f"{key} = {value}")
            lines.append("")
        return "\n".join(lines)

    def for_case(self, shape=None, field=None):
        """Copy with the shape and/or field swapped for a corpus name (validated)."""
        update = {}
        if shape is not None:
            update["shape"] = ShapeSection(name=shape)
        if field is not None:
            update["field"] = FieldSection(name=field)
        return self.model_copy(update=update)

    def apply_resolution(self, resolution):
        """Overrides h and the epsilon schedule with a named preset."""
        if resolution not in RESOLUTIONS:
            raise ConfigError(f"unknown resolution {resolution!r}", field="--resolution")
        preset = RESOLUTIONS[resolution]
        grid = self.grid.model_copy(update={"spacing": preset["spacing"]})
        schedule = self.schedule.model_copy(update={"eps": list(preset["eps"])})
        return self.model_copy(update={"grid": grid, "schedule": schedule})


def _parse_value(value, annotation):
    value = value.strip()
    if annotation == list[float]:
        if value.startswith("["):
            return json.loads(value)
        return [float(v) for v in value.split(",") if v.strip()]
    return value


def _line_of(text, section, key=None):
    """Best-effort line number of a section header or a key inside it."""
    current = None
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        m = re.match(r"\[(.+)\]", stripped)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return number
            continue
        if current == section and key and re.match(rf"{re.escape(key)}\s*[=:]", stripped):
            return number
    return None
