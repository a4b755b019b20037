"""TOML configuration loading and run manifests."""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import tomli

from . import __version__
from .experiments import ExperimentConfig
from .logflow import Roof, RoofSpec, SmoothPart


class ConfigError(ValueError):
    """Malformed configuration; the message carries line or field details."""


def _read_toml(path: Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _number(v, where: str) -> Fraction:
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ConfigError(f"{where}: expected a number or a fraction string, got {v!r}")
    try:
        return Fraction(v)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: cannot parse {v!r} as a number") from exc


def parse_roof(obj: dict, precision_bits: int = 256, source: str = "roof") -> Roof:
    """Roof from a table with ``[[right]]``/``[[left]]`` entries ``{z, C}`` and
    an optional ``[smooth]`` table ``{const, cos = [...], sin = [...]}``."""
    unknown = set(obj) - {"right", "left", "smooth"}
    if unknown:
        raise ConfigError(f"{source}: unknown keys {sorted(unknown)}")
    sings = {}
    for side in ("right", "left"):
        entries = obj.get(side, [])
        if not isinstance(entries, list):
            raise ConfigError(f"{source}.{side}: expected an array of tables")
        out = []
        for i, e in enumerate(entries):
            where = f"{source}.{side}[{i}]"
            if not isinstance(e, dict) or set(e) != {"z", "C"}:
                raise ConfigError(f"{where}: need exactly the keys z and C")
            out.append((_number(e["z"], where + ".z"), _number(e["C"], where + ".C")))
        sings[side] = tuple(out)
    sm = obj.get("smooth", {})
    extra = set(sm) - {"const", "cos", "sin"}
    if extra:
        raise ConfigError(f"{source}.smooth: unknown keys {sorted(extra)}")
    try:
        smooth = SmoothPart(
            _number(sm.get("const", 0), f"{source}.smooth.const"),
            tuple(_number(c, f"{source}.smooth.cos") for c in sm.get("cos", [])),
            tuple(_number(c, f"{source}.smooth.sin") for c in sm.get("sin", [])),
        )
        spec = RoofSpec(sings["right"], sings["left"], smooth)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{source}: {exc}") from exc
    return Roof(spec, precision_bits)


def load_roof_toml(path: Path, precision_bits: int = 256) -> Roof:
    return parse_roof(_read_toml(path), precision_bits, str(path))


def load_experiment_config(path: Path) -> ExperimentConfig:
    """Read the ``[experiment]`` table; a roof given as a relative file path is
    resolved against the config's directory."""
    path = Path(path)
    data = _read_toml(path)
    unknown = set(data) - {"experiment"}
    if unknown:
        raise ConfigError(f"{path}: unknown top-level tables {sorted(unknown)}")
    table = dict(data.get("experiment", {}))
    roof = table.get("roof")
    if isinstance(roof, str) and roof.endswith(".toml") and not Path(roof).is_absolute():
        table["roof"] = str((path.parent / roof).resolve())
    try:
        return ExperimentConfig.from_dict(table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: [experiment] {exc}") from exc


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    tool_version: str = __version__
    created: float = field(default_factory=time.time)
    input_hashes: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)  # [{"path", "sha256"}], paths relative to the out dir
    options: dict = field(default_factory=dict)

    def content(self) -> dict:
        """Everything except the timestamp."""
        return {
            "command": self.command,
            "config": self.config,
            "tool_version": self.tool_version,
            "input_hashes": self.input_hashes,
            "outputs": self.outputs,
            "options": self.options,
        }

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.content(), sort_keys=True).encode()).hexdigest()

    def add_output(self, out_dir: Path, path: Path):
        self.outputs.append({"path": str(Path(path).relative_to(out_dir)), "sha256": sha256_file(path)})

    def to_json(self) -> str:
        d = self.content()
        d["created"] = self.created
        d["content_hash"] = self.content_hash
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        d = json.loads(text)
        m = cls(d["command"], d["config"], d["tool_version"], d["created"], d["input_hashes"], d["outputs"],
                d.get("options", {}))
        if "content_hash" in d and d["content_hash"] != m.content_hash:
            raise ConfigError("manifest content hash mismatch")
        return m

    def experiment_config(self) -> ExperimentConfig:
        return ExperimentConfig.from_dict(self.config)
