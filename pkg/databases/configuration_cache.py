"""Directory-backed cache of solved configurations.

One file per (N, tol, precision, format version).  Line 1 is a JSON header,
then x_1..x_m one per line, every float written with 17 significant digits.
"""
import json
import math
import os
import tempfile
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, ValidationError

from components.ground_state import Configuration, median_index, reconstruct, solve
from utils.errors import CacheError, MIWError
from utils.settings import Precision, get_settings

FORMAT_VERSION = 1
_NONFINITE = {math.inf: "Infinity", -math.inf: "-Infinity"}


def _fmt(value: float) -> str:
    return "%.17g" % value


class FixedDigitsEncoder(json.JSONEncoder):
    """JSON encoder that writes every float with 17 significant digits."""

    def iterencode(self, o, _one_shot=False):
        def floatstr(value):
            if math.isfinite(value):
                return _fmt(value)
            if not self.allow_nan:
                raise ValueError(f"float {value!r} is not JSON compliant")
            return _NONFINITE.get(value, "NaN")

        encode = json.encoder._make_iterencode(
            {} if self.check_circular else None,
            self.default,
            json.encoder.py_encode_basestring_ascii if self.ensure_ascii else json.encoder.py_encode_basestring,
            self.indent,
            floatstr,
            self.key_separator,
            self.item_separator,
            self.sort_keys,
            self.skipkeys,
            _one_shot,
        )
        return encode(o, 0)


class CachedResiduals(BaseModel):
    model_config = ConfigDict(frozen=True)

    zero_mean_residual: float
    variance_residual: float
    recursion_residual: float
    median_residual: float


class CacheEntry(BaseModel):
    """Header of a cache file plus the stored first half."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n_worlds: int
    tol: float
    precision: Precision
    format_version: int = FORMAT_VERSION
    shoot_value: float
    residuals: CachedResiduals
    half_locations: np.ndarray

    @classmethod
    def from_configuration(cls, cfg: Configuration) -> "CacheEntry":
        r = cfg.residuals
        return cls(
            n_worlds=cfg.n_worlds,
            tol=cfg.tol,
            precision=cfg.precision,
            shoot_value=cfg.shoot_value,
            residuals=CachedResiduals(
                zero_mean_residual=r.zero_mean_residual,
                variance_residual=r.variance_residual,
                recursion_residual=r.recursion_residual,
                median_residual=r.median_residual,
            ),
            half_locations=np.array(cfg.half_locations, dtype=np.float64),
        )

    def header(self) -> dict:
        return {
            "n_worlds": self.n_worlds,
            "tol": self.tol,
            "precision": self.precision,
            "format_version": self.format_version,
            "shoot_value": self.shoot_value,
            "residuals": self.residuals.model_dump(),
        }

    def header_line(self) -> str:
        return json.dumps(self.header(), cls=FixedDigitsEncoder)

    def dumps(self) -> str:
        body = "\n".join(_fmt(v) for v in self.half_locations)
        return f"{self.header_line()}\n{body}\n"

    @classmethod
    def loads(cls, text: str) -> "CacheEntry":
        lines = text.splitlines()
        if not lines:
            raise CacheError("empty cache file")
        try:
            header = json.loads(lines[0])
            half = np.array([float(v) for v in lines[1:] if v.strip()], dtype=np.float64)
            return cls(**header, half_locations=half)
        except (ValueError, TypeError, ValidationError) as exc:
            raise CacheError(f"malformed cache file: {exc}") from exc

    def to_configuration(self) -> Configuration:
        """Mirror reconstruction; the stored residuals must be reproduced exactly."""
        if self.format_version != FORMAT_VERSION:
            raise CacheError(f"format version {self.format_version} is not {FORMAT_VERSION}")
        m = median_index(self.n_worlds)
        if self.half_locations.shape != (m,):
            raise CacheError(f"expected {m} locations for N={self.n_worlds}, found {self.half_locations.shape[0]}")
        try:
            cfg = reconstruct(self.half_locations, self.n_worlds, self.shoot_value, self.tol, self.precision)
        except MIWError as exc:
            raise CacheError(f"stored locations are not a valid configuration: {exc}") from exc
        stored = self.residuals.model_dump()
        rebuilt = asdict(cfg.residuals)
        mismatched = [k for k, v in stored.items() if rebuilt[k] != v]
        if mismatched:
            raise CacheError(f"residuals {mismatched} differ after reconstruction")
        return cfg


class ConfigurationCache:
    def __init__(self, directory: Optional[Union[str, Path]] = None):
        settings = get_settings()
        env_dir = os.environ.get("MIW_CACHE_DIR")
        # The environment wins over both the argument and the settings file.
        self.directory = Path(env_dir or directory or settings.cache_dir)

    def path_for(self, n_worlds: int, tol: float, precision: str) -> Path:
        return self.directory / f"miw_N{int(n_worlds)}_tol{_fmt(tol)}_{precision}_v{FORMAT_VERSION}.txt"

    def load(self, n_worlds: int, tol: float, precision: str) -> Optional[Configuration]:
        """The cached configuration, or None when absent or invalid."""
        path = self.path_for(n_worlds, tol, precision)
        if not path.exists():
            return None
        try:
            entry = CacheEntry.loads(path.read_text(encoding="utf-8"))
            if (entry.n_worlds, entry.tol, entry.precision) != (int(n_worlds), float(tol), precision):
                raise CacheError("header does not match the cache key")
            cfg = entry.to_configuration()
        except CacheError as exc:
            logger.warning("ignoring cache entry {}: {}", path, exc)
            return None
        logger.info("cache hit N={} ({})", n_worlds, path.name)
        return cfg

    def save(self, cfg: Configuration, path: Optional[Path] = None) -> Path:
        """Write atomically: temp file in the target directory, then rename."""
        path = Path(path) if path is not None else self.path_for(cfg.n_worlds, cfg.tol, cfg.precision)
        path.parent.mkdir(parents=True, exist_ok=True)
        text = CacheEntry.from_configuration(cfg).dumps()
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except OSError:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        logger.info("cached N={} at {}", cfg.n_worlds, path)
        return path

    def get_or_solve(
        self, n_worlds: int, tol: Optional[float] = None, precision: Optional[str] = None
    ) -> Configuration:
        settings = get_settings()
        tol = settings.tol if tol is None else float(tol)
        precision = settings.precision if precision is None else precision
        cfg = self.load(n_worlds, tol, precision)
        if cfg is None:
            cfg = solve(n_worlds, tol=tol, precision=precision)
            self.save(cfg)
        return cfg


def read_entry(path: Union[str, Path]) -> Configuration:
    """Load a configuration file from any path, such as one saved by ``solve --out``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CacheError(f"cannot read {path}: {exc}") from exc
    return CacheEntry.loads(text).to_configuration()
