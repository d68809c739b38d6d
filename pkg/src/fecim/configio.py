"""Experiment configuration: INI-style files with section nesting, CLI
overrides, and calibration dump/reload in the same format."""

from __future__ import annotations

import configparser
import hashlib
import io
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import shipped
from .cell import BiasConfig
from .constants import celsius_to_kelvin
from .devices import CellDesign, DeviceParams, DomainError, VthTable
from .array import ArrayConfig

ENV_CONFIG_DIR = "FECIM_CONFIG_DIR"


class UsageError(ValueError):
    """Bad configuration; carries the offending field path."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path


def _defaults() -> dict:
    d = shipped.DESIGN
    return {
        "experiment": {
            "seed": "12345",
            "out_dir": "results",
            "threads": "1",
        },
        "device.fefet": {
            "i_s": repr(d.fefet.i_s),
            "xi": repr(d.fefet.xi),
            "w_over_l": repr(d.fefet.w_over_l),
            "vth_temp_coeff": repr(d.fefet.vth_temp_coeff),
        },
        "device.mosfet": {
            "i_s": repr(d.mosfet.i_s),
            "xi": repr(d.mosfet.xi),
            "w_over_l": repr(d.mosfet.w_over_l),
            "vth_temp_coeff": repr(d.mosfet.vth_temp_coeff),
            "vth": repr(d.mosfet_vth),
        },
        "device.vth_table": {
            "level0": repr(d.vth_table.levels[0]),
            "level1": repr(d.vth_table.levels[1]),
            "mlc_span": repr(shipped.MLC_SPAN),
            "erased_temp_coeff": repr(shipped.ERASED_TEMP_COEFF),
        },
        "device.cell": {
            "m2_vth_offset": repr(d.m2_vth_offset),
        },
        "bias": {
            "v_dl": "0.4",
            "v_bl": "1.0",
            "v_read": "0.35",
            "v_wl_off": "-0.3",
            "v_sl": "0.0",
        },
        "array": {
            "rows": "8",
            "cols": "8",
            "bits_per_cell": "2",
            "adc_sharing": "8",
        },
        "adc": {
            "bits": "3",
        },
        "temperature": {
            "t_min_c": "0.0",
            "t_max_c": "85.0",
            "points": "18",
        },
        "variation": {
            "sigma_vt": "0.054",
            "runs": "500",
        },
        "calibration": {
            "on_off_ratio": "238.0",
            "r_on_ohms": "118e3",
            "v_read": "0.35",
        },
        "inference": {
            "mode": "ideal-integer",
            "dataset": "synthetic:n=128,seed=7",
            "weights": "synthetic:seed=0",
            "repeats": "1",
            "sigma_table": "",
        },
        "perf": {
            "constants": "calibrated-45nm",
            "adc_bits": "5",
            "samples": "1",
            "rows": "128",
            "cols": "128",
        },
    }


@dataclass
class ExperimentConfig:
    """Fully resolved configuration with typed accessors."""

    raw: configparser.ConfigParser
    source_path: str | None = None

    # -- plumbing ---------------------------------------------------------

    def get(self, section: str, key: str) -> str:
        try:
            return self.raw.get(section, key)
        except (configparser.NoSectionError, configparser.NoOptionError):
            raise UsageError(f"{section}.{key}", "missing configuration value")

    def _float(self, section: str, key: str) -> float:
        val = self.get(section, key)
        try:
            return float(val)
        except ValueError:
            raise UsageError(f"{section}.{key}", f"not a number: {val!r}")

    def _int(self, section: str, key: str) -> int:
        val = self.get(section, key)
        try:
            return int(val)
        except ValueError:
            raise UsageError(f"{section}.{key}", f"not an integer: {val!r}")

    def set_override(self, dotted: str, value: str):
        if "=" in dotted:
            raise UsageError(dotted, "pass overrides as section.key value")
        section, _, key = dotted.rpartition(".")
        if not section:
            raise UsageError(dotted, "override needs a section.key path")
        if not self.raw.has_section(section):
            self.raw.add_section(section)
        self.raw.set(section, key, value)

    def resolved_text(self) -> str:
        buf = io.StringIO()
        self.raw.write(buf)
        return buf.getvalue()

    def config_hash(self) -> str:
        """Hash of the experiment-defining values; output location and
        thread count do not change results and are excluded."""
        clone = configparser.ConfigParser()
        clone.read_string(self.resolved_text())
        for volatile in ("out_dir", "threads"):
            clone.remove_option("experiment", volatile)
        buf = io.StringIO()
        clone.write(buf)
        return hashlib.sha256(buf.getvalue().encode()).hexdigest()[:16]

    # -- typed views ------------------------------------------------------

    @property
    def seed(self) -> int:
        return self._int("experiment", "seed")

    @property
    def out_dir(self) -> Path:
        return Path(self.get("experiment", "out_dir"))

    @property
    def threads(self) -> int:
        return self._int("experiment", "threads")

    def design(self) -> CellDesign:
        fe = DeviceParams(
            i_s=self._float("device.fefet", "i_s"),
            xi=self._float("device.fefet", "xi"),
            w_over_l=self._float("device.fefet", "w_over_l"),
            vth_temp_coeff=self._float("device.fefet", "vth_temp_coeff"),
        )
        mos = DeviceParams(
            i_s=self._float("device.mosfet", "i_s"),
            xi=self._float("device.mosfet", "xi"),
            w_over_l=self._float("device.mosfet", "w_over_l"),
            vth_temp_coeff=self._float("device.mosfet", "vth_temp_coeff"),
        )
        erased_coeff = self._float("device.vth_table", "erased_temp_coeff")
        table = VthTable.build(
            level0=self._float("device.vth_table", "level0"),
            level1=self._float("device.vth_table", "level1"),
            mlc_span=self._float("device.vth_table", "mlc_span"),
            temp_coeffs=(erased_coeff,) + (fe.vth_temp_coeff,) * 7,
        )
        return CellDesign(
            fefet=fe,
            mosfet=mos,
            vth_table=table,
            mosfet_vth=self._float("device.mosfet", "vth"),
            m2_vth_offset=self._float("device.cell", "m2_vth_offset"),
        )

    def bias(self) -> BiasConfig:
        try:
            return BiasConfig(
                v_dl=self._float("bias", "v_dl"),
                v_bl=self._float("bias", "v_bl"),
                v_read=self._float("bias", "v_read"),
                v_wl_off=self._float("bias", "v_wl_off"),
                v_sl=self._float("bias", "v_sl"),
            )
        except DomainError as e:
            raise UsageError("bias", str(e))

    def array(self) -> ArrayConfig:
        try:
            return ArrayConfig(
                rows=self._int("array", "rows"),
                cols=self._int("array", "cols"),
                bits_per_cell=self._int("array", "bits_per_cell"),
                bias=self.bias(),
                adc_sharing=self._int("array", "adc_sharing"),
            )
        except DomainError as e:
            raise UsageError("array", str(e))

    def t_grid_k(self) -> np.ndarray:
        lo = self._float("temperature", "t_min_c")
        hi = self._float("temperature", "t_max_c")
        n = self._int("temperature", "points")
        if n < 1:
            raise UsageError("temperature.points", "need at least one point")
        if hi < lo:
            raise UsageError("temperature.t_max_c", "t_max_c below t_min_c")
        return np.linspace(celsius_to_kelvin(lo), celsius_to_kelvin(hi), n)

    def sigma_table(self) -> dict:
        text = self.get("inference", "sigma_table").strip()
        if not text:
            return {}
        table = {}
        for pair in text.split(","):
            if not pair.strip():
                continue
            try:
                k, v = pair.split(":")
                table[int(k)] = float(v)
            except ValueError:
                raise UsageError("inference.sigma_table",
                                 f"bad entry {pair!r}, expected digit:sigma")
        return table


def load_config(path: str | None = None, overrides=()) -> ExperimentConfig:
    """Defaults, then the file (if any), then CLI overrides."""
    parser = configparser.ConfigParser()
    for section, values in _defaults().items():
        parser[section] = dict(values)
    source = None
    if path is not None:
        p = Path(path)
        if not p.is_absolute() and not p.exists():
            env_dir = os.environ.get(ENV_CONFIG_DIR)
            if env_dir and (Path(env_dir) / p).exists():
                p = Path(env_dir) / p
        if not p.exists():
            raise UsageError("config", f"file not found: {path}")
        parser.read(p)
        source = str(p)
    cfg = ExperimentConfig(raw=parser, source_path=source)
    for dotted, value in overrides:
        cfg.set_override(dotted, value)
    return cfg


def dump_design(design: CellDesign, erased_coeff: float, mlc_span: float) -> str:
    """Calibrated device parameters in the configuration format."""
    parser = configparser.ConfigParser()
    parser["device.fefet"] = {
        "i_s": repr(design.fefet.i_s),
        "xi": repr(design.fefet.xi),
        "w_over_l": repr(design.fefet.w_over_l),
        "vth_temp_coeff": repr(design.fefet.vth_temp_coeff),
    }
    parser["device.mosfet"] = {
        "i_s": repr(design.mosfet.i_s),
        "xi": repr(design.mosfet.xi),
        "w_over_l": repr(design.mosfet.w_over_l),
        "vth_temp_coeff": repr(design.mosfet.vth_temp_coeff),
        "vth": repr(design.mosfet_vth),
    }
    parser["device.vth_table"] = {
        "level0": repr(design.vth_table.levels[0]),
        "level1": repr(design.vth_table.levels[1]),
        "mlc_span": repr(mlc_span),
        "erased_temp_coeff": repr(erased_coeff),
    }
    parser["device.cell"] = {
        "m2_vth_offset": repr(design.m2_vth_offset),
    }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
