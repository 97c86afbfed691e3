from __future__ import annotations
import configparser
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple, Union

from .models import LevyModelSpec
from .util import ConfigError, LevyError, derive_seed
from .verify.checks import Check
from .verify.settings import CheckSettings

logger = logging.getLogger(__name__)

EXPERIMENT_SECTION = "experiment"
MODEL_PREFIX = "model:"
CHECK_PREFIX = "check:"
# keys of [experiment] that are not check settings
EXPERIMENT_KEYS = ("seed", "output_dir", "workers", "checks")
# keys of [check:<name>] that are not check settings
CHECK_KEYS = ("models",)

SECTION_PATTERN = re.compile(r"^\s*\[([^\]]+)\]")
KEY_PATTERN = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def _split_list(raw: str) -> List[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def _float_tuple(raw: str) -> Tuple[float, ...]:
    return tuple(float(item) for item in _split_list(raw))


# CheckSettings annotations (strings under postponed evaluation) to parsers
SETTING_PARSERS: Dict[str, Callable[[str], Any]] = {
    "float": float,
    "int": int,
    "str": str.strip,
    "Tuple[float, ...]": _float_tuple,
}


@dataclass(frozen=True)
class Job:
    """One selected check on one model. The job seed is derived from the job name."""

    name: str
    check: Check
    model_label: str
    seed: int


@dataclass
class ExperimentConfig:
    seed: int
    models: Dict[str, LevyModelSpec]
    settings: CheckSettings
    check_settings: Dict[Check, CheckSettings] = field(default_factory=dict)
    selection: List[Tuple[Check, str]] = field(default_factory=list)
    output_dir: Path = Path("results")
    workers: int = 1
    filename: Optional[str] = None

    def settings_for(self, check: Check) -> CheckSettings:
        return self.check_settings.get(check, self.settings)

    @property
    def jobs(self) -> List[Job]:
        return [
            Job(
                f"{check.tag}-{label}",
                check,
                label,
                derive_seed(self.seed, f"{check.tag}-{label}"),
            )
            for check, label in self.selection
        ]

    def with_overrides(self, overrides: Mapping[str, Any]) -> ExperimentConfig:
        """Command-line values win over every section of the file."""
        values = {k: v for k, v in overrides.items() if v is not None}
        if "seed" in values:
            self.seed = int(values.pop("seed"))
        if "output_dir" in values:
            self.output_dir = Path(values.pop("output_dir"))
        if "workers" in values:
            self.workers = int(values.pop("workers"))
        if values:
            self.settings = self.settings.updated(values)
            self.check_settings = {c: s.updated(values) for c, s in self.check_settings.items()}
        return self


class _LineIndex:
    """Line numbers of the section headers and keys of an INI text."""

    def __init__(self, text: str) -> None:
        self.sections: Dict[str, int] = {}
        self.keys: Dict[Tuple[str, str], int] = {}
        section = None
        for number, line in enumerate(text.splitlines(), start=1):
            header = SECTION_PATTERN.match(line)
            if header:
                section = header.group(1).strip()
                self.sections.setdefault(section, number)
                continue
            key = KEY_PATTERN.match(line)
            if key and section is not None:
                self.keys.setdefault((section, key.group(1).strip().lower()), number)

    def of(self, section: str, key: Optional[str] = None) -> Optional[int]:
        if key is not None and (section, key) in self.keys:
            return self.keys[(section, key)]
        return self.sections.get(section)


def _parse_settings(
    base: CheckSettings,
    section: configparser.SectionProxy,
    reserved: Tuple[str, ...],
    lines: _LineIndex,
    filename: str,
) -> CheckSettings:
    types = CheckSettings.field_types()
    values = {}
    for key, raw in section.items():
        if key in reserved:
            continue
        line = lines.of(section.name, key)
        if key not in types:
            raise ConfigError(f"unknown key {key!r} in [{section.name}]", filename, line)
        try:
            values[key] = SETTING_PARSERS[types[key]](raw)
        except ValueError:
            raise ConfigError(f"{key} = {raw!r} is not a valid {types[key]}", filename, line)
    try:
        return base.updated(values)
    except ValueError as e:
        raise ConfigError(str(e), filename, lines.of(section.name))


def parse_config(text: str, filename: str = "<config>") -> ExperimentConfig:
    """
    Parse and validate an experiment file. Every referenced model label is resolved and
    every model spec validated here, before any simulation runs.
    """
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    try:
        parser.read_string(text, source=filename)
    except configparser.DuplicateSectionError as e:
        raise ConfigError(f"duplicate section [{e.section}]", filename, e.lineno)
    except configparser.DuplicateOptionError as e:
        raise ConfigError(f"duplicate key {e.option!r} in [{e.section}]", filename, e.lineno)
    except configparser.Error as e:
        raise ConfigError(e.message, filename, getattr(e, "lineno", None))
    lines = _LineIndex(text)

    if not parser.has_section(EXPERIMENT_SECTION):
        raise ConfigError(f"missing [{EXPERIMENT_SECTION}] section", filename)
    experiment = parser[EXPERIMENT_SECTION]
    if "seed" not in experiment:
        raise ConfigError("[experiment] has no seed", filename, lines.of(EXPERIMENT_SECTION))
    try:
        seed = int(experiment["seed"])
        workers = int(experiment.get("workers", "1"))
    except ValueError as e:
        raise ConfigError(str(e), filename, lines.of(EXPERIMENT_SECTION, "seed"))
    if seed < 0 or workers < 1:
        raise ConfigError("seed must be >= 0 and workers >= 1", filename, lines.of("experiment"))
    settings = _parse_settings(CheckSettings(), experiment, EXPERIMENT_KEYS, lines, filename)

    models: Dict[str, LevyModelSpec] = {}
    check_sections: Dict[Check, configparser.SectionProxy] = {}
    for name in parser.sections():
        line = lines.of(name)
        if name == EXPERIMENT_SECTION:
            continue
        if name.startswith(MODEL_PREFIX):
            label = name[len(MODEL_PREFIX) :].strip()
            try:
                models[label] = LevyModelSpec.from_mapping(label, dict(parser[name]))
            except LevyError as e:
                raise ConfigError(e.message, filename, line)
            except ValueError as e:
                raise ConfigError(str(e), filename, line)
        elif name.startswith(CHECK_PREFIX):
            try:
                check = Check.from_tag(name[len(CHECK_PREFIX) :].strip())
            except ValueError as e:
                raise ConfigError(str(e), filename, line)
            check_sections[check] = parser[name]
        else:
            raise ConfigError(f"unknown section [{name}]", filename, line)

    if "checks" in experiment:
        raw = experiment["checks"].strip()
        try:
            selected = Check.tags() if raw == "all" else _split_list(raw)
            checks = [Check.from_tag(tag) for tag in selected]
        except ValueError as e:
            raise ConfigError(str(e), filename, lines.of(EXPERIMENT_SECTION, "checks"))
    else:
        checks = sorted(check_sections)

    check_settings: Dict[Check, CheckSettings] = {}
    selection: List[Tuple[Check, str]] = []
    for check in checks:
        section = check_sections.get(check)
        labels = list(models)
        if section is not None:
            check_settings[check] = _parse_settings(settings, section, CHECK_KEYS, lines, filename)
            if "models" in section:
                labels = _split_list(section["models"])
        for label in labels:
            if label not in models:
                line = lines.of(section.name, "models") if section is not None else None
                raise ConfigError(
                    f"check {check.tag} references unknown model {label!r}", filename, line
                )
            selection.append((check, label))

    logger.info("%s: %d models, %d jobs", filename, len(models), len(selection))
    return ExperimentConfig(
        seed,
        models,
        settings,
        check_settings,
        selection,
        Path(experiment.get("output_dir", "results")),
        workers,
        filename,
    )


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", str(path))
    return parse_config(text, str(path))
