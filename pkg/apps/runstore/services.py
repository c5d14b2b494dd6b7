import hashlib
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import asdict
from pathlib import Path

import numpy as np
from decouple import RepositoryEnv
from django.conf import settings
from rest_framework.renderers import JSONRenderer

from apps.asymptotics.models import ModScatReport
from apps.asymptotics.serializers import ModScatReportSerializer
from apps.core.exceptions import ConfigError, LabError
from apps.decay_probe.models import DecaySeries
from apps.decay_probe.serializers import DecaySeriesSerializer
from .models import RunConfig, RunManifest
from .serializers import SECTION_SERIALIZERS, RunConfigSerializer, RunManifestSerializer, config_sections

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
SERIES_HEADER = ["t", "norm"]


def _first_error(errors, prefix=""):
    """(dotted field path, message) of the first validation error in a nested DRF error dict."""
    for key, value in errors.items():
        path = prefix if key == "non_field_errors" else (f"{prefix}.{key}" if prefix else key)
        if isinstance(value, dict):
            return _first_error(value, path)
        message = value[0] if isinstance(value, list) else value
        return path, str(message)
    return prefix, "invalid"


def _json_safe(value):
    # Strict JSON has no NaN or infinity
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_atomic(path: Path, content: bytes):
    """Write to a temporary file in the same directory, then rename over path."""
    handle, temporary = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(handle, "wb") as stream:
            stream.write(content)
        os.replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.unlink(temporary)
        raise


class RunStoreService:
    """
    Run configs in, deterministic artifacts and manifests out
    """

    @staticmethod
    def parse_config(data: dict) -> RunConfig:
        """
        Validate a flat {"section.key": value} mapping

        Raises:
            ConfigError: Listing unknown keys, or naming the first invalid field by its path
        """
        nested = {section: {} for section in SECTION_SERIALIZERS}
        unknown = []
        for key, value in data.items():
            section, _, name = key.partition(".")
            if section not in SECTION_SERIALIZERS or name not in SECTION_SERIALIZERS[section]().fields:
                unknown.append(key)
                continue
            nested[section][name] = value
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(sorted(unknown))}")

        serializer = RunConfigSerializer(data=nested)
        if not serializer.is_valid():
            path, message = _first_error(serializer.errors)
            raise ConfigError(message, field_path=path)
        return serializer.save()

    @staticmethod
    def load_config(path) -> RunConfig:
        """
        Read a `section.key = value` file (# comments, blank lines allowed)

        Raises:
            ConfigError: If the file is missing, has a line without `=`, or fails validation
        """
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Config file {path} does not exist")
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
            repository = RepositoryEnv(str(path))
        except (OSError, UnicodeDecodeError) as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e

        for number, line in enumerate(lines, start=1):
            stripped = line.strip()
            if stripped and not stripped.startswith("#") and "=" not in stripped:
                raise ConfigError(f"Line {number} of {path} is not of the form section.key = value")

        config = RunStoreService.parse_config(repository.data)
        logger.info(f"Loaded run config from {path}")
        return config

    @staticmethod
    def dump_config(config: RunConfig) -> str:
        """Every field, defaults included, in the file format load_config reads back to an equal RunConfig."""
        lines = []
        for section, values in config_sections(config).items():
            lines.extend(f"{section}.{name} = {_format_value(value)}" for name, value in values.items())
            lines.append("")
        return "\n".join(lines)

    @staticmethod
    def config_echo(config: RunConfig) -> dict:
        return _json_safe(config_sections(config))

    @staticmethod
    def render_csv(header, rows) -> bytes:
        """Header line plus one row per observation, numbers at CSV_SIGNIFICANT_DIGITS."""
        digits = settings.SPECTRAL_LAB["CSV_SIGNIFICANT_DIGITS"]
        buffer = io.StringIO()
        rows = np.asarray(rows, dtype=float).reshape(-1, len(header))
        np.savetxt(buffer, rows, delimiter=",", header=",".join(header), comments="", fmt=f"%.{digits}g")
        return buffer.getvalue().encode("utf-8")

    @staticmethod
    def render_json(data) -> bytes:
        return JSONRenderer().render(_json_safe(data), renderer_context={"indent": 2}) + b"\n"

    @staticmethod
    def render_artifact(obj, suffix: str = ".csv") -> bytes:
        """
        Bytes of one artifact

            DecaySeries     `t,norm` CSV, or its serializer as JSON for a .json suffix
            ModScatReport   JSON
            (header, rows)  CSV
            dict            JSON

        Raises:
            LabError: For objects with no output schema
        """
        if isinstance(obj, DecaySeries):
            if suffix == ".json":
                return RunStoreService.render_json(DecaySeriesSerializer(obj).data)
            return RunStoreService.render_csv(SERIES_HEADER, np.column_stack([obj.ts, obj.norms]))
        if isinstance(obj, ModScatReport):
            return RunStoreService.render_json(ModScatReportSerializer(obj).data)
        if isinstance(obj, tuple) and len(obj) == 2:
            return RunStoreService.render_csv(*obj)
        if isinstance(obj, dict):
            return RunStoreService.render_json(obj)
        raise LabError(f"No output schema for {type(obj).__name__}")

    @staticmethod
    def emit_series(obj, path) -> Path:
        """
        Write one series or report atomically

        Raises:
            LabError: If the file cannot be written
        """
        path = Path(path)
        content = RunStoreService.render_artifact(obj, path.suffix)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            _write_atomic(path, content)
        except OSError as e:
            raise LabError(f"Cannot write {path}: {e}") from e
        return path

    @staticmethod
    def write_report(directory, artifacts: dict, command: str = "", config: RunConfig | None = None, timings=None, checks=None, passed=None) -> RunManifest:
        """
        Write every artifact, then the manifest

        Any manifest left by an earlier run is removed first, so a run interrupted
        midway leaves a directory without one.

        Args:
            directory: Run directory, created if needed
            artifacts: File name -> object accepted by render_artifact, or raw bytes
            command: Subcommand that produced the run
            config: Echoed into the manifest
            timings: Stage name -> wall-clock seconds
            checks: Acceptance check name -> pass/fail
            passed: Outcome of the acceptance checks, if any

        Returns:
            RunManifest with the sha256 of every output

        Raises:
            LabError: On any IO failure, naming the path
        """
        directory = Path(directory)
        manifest = RunManifest(
            version=settings.LAB_VERSION,
            command=command,
            config=RunStoreService.config_echo(config) if config is not None else {},
            timings={name: float(value) for name, value in (timings or {}).items()},
            checks={name: bool(ok) for name, ok in (checks or {}).items()},
            passed=passed,
        )
        manifest_path = directory / MANIFEST_NAME
        try:
            directory.mkdir(parents=True, exist_ok=True)
            manifest_path.unlink(missing_ok=True)
        except OSError as e:
            raise LabError(f"Cannot prepare run directory {directory}: {e}") from e

        for name, obj in artifacts.items():
            path = directory / name
            content = obj if isinstance(obj, bytes) else RunStoreService.render_artifact(obj, path.suffix)
            try:
                _write_atomic(path, content)
            except OSError as e:
                raise LabError(f"Cannot write {path}: {e}") from e
            manifest.outputs[name] = hashlib.sha256(content).hexdigest()

        try:
            _write_atomic(manifest_path, RunStoreService.render_json(RunManifestSerializer(asdict(manifest)).data))
        except OSError as e:
            raise LabError(f"Cannot write {manifest_path}: {e}") from e
        logger.info(f"Wrote {len(manifest.outputs)} outputs and manifest to {directory}")
        return manifest

    @staticmethod
    def read_manifest(directory) -> dict | None:
        path = Path(directory) / MANIFEST_NAME
        if not path.is_file():
            return None
        return json.loads(path.read_text(encoding="utf-8"))
