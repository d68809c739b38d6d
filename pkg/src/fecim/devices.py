"""Compact transistor models: temperature-dependent currents and the
multi-level threshold table of the ferroelectric gate stack."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .constants import BOLTZMANN_J_PER_K, ELEMENTARY_CHARGE_C, T_REF_K


class DomainError(ValueError):
    """Input outside the physical domain of an operation."""


class UnmappedPulseError(ValueError):
    """Write pulse amplitude does not match any programming level."""


def thermal_voltage(t_kelvin: float) -> float:
    """kT/q in volts. Rejects non-positive temperatures."""
    if t_kelvin <= 0.0:
        raise DomainError(f"temperature must be positive, got {t_kelvin} K")
    return BOLTZMANN_J_PER_K * t_kelvin / ELEMENTARY_CHARGE_C


def vth_at_temperature(vth_ref: float, coeff_v_per_k: float, t_kelvin: float) -> float:
    """Linear threshold drift around the 300.15 K reference point."""
    return vth_ref + coeff_v_per_k * (t_kelvin - T_REF_K)


@dataclass(frozen=True)
class DeviceParams:
    """Parameters of one transistor (ferroelectric or plain MOSFET).

    i_s is the current scale in amps, xi the subthreshold slope factor
    (>= 1), w_over_l the width/length ratio. vth_temp_coeff is the linear
    threshold drift in V/K (typically negative).
    """

    i_s: float
    xi: float
    w_over_l: float = 1.0
    vth_temp_coeff: float = -1.0e-3
    n_type: bool = True

    def __post_init__(self):
        if self.i_s <= 0.0:
            raise DomainError(f"i_s must be > 0, got {self.i_s}")
        if self.xi < 1.0:
            raise DomainError(f"xi must be >= 1, got {self.xi}")
        if self.w_over_l <= 0.0:
            raise DomainError(f"w_over_l must be > 0, got {self.w_over_l}")

    @property
    def gain(self) -> float:
        return self.i_s * self.w_over_l


def drain_current(
    p: DeviceParams,
    vth: float,
    v_gs,
    v_ds,
    t_kelvin: float,
    vth_temp_shift: bool = True,
):
    """Drain current at the given bias and temperature.

    ``vth`` is the 300.15 K threshold; the linear temperature drift from
    ``p.vth_temp_coeff`` is applied unless ``vth_temp_shift`` is False.
    Accepts scalars or arrays for the bias voltages.
    """
    v_t = thermal_voltage(t_kelvin)
    vth_eff = vth_at_temperature(vth, p.vth_temp_coeff, t_kelvin) if vth_temp_shift else vth
    out = kernels.device_current(v_gs, v_ds, vth_eff, p.gain, p.xi, v_t)
    if np.ndim(v_gs) == 0 and np.ndim(v_ds) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class VthTable:
    """Ordered threshold-voltage states of the ferroelectric transistor.

    Index 0 is the highest threshold (erased, OFF-like); indices 1..7 are
    the programmed multi-level states with strictly decreasing thresholds.
    ``write_voltage_map`` maps write-pulse amplitude (V) to a level index.
    ``temp_coeffs`` optionally overrides the device drift per level.
    """

    levels: tuple
    write_voltage_map: tuple
    temp_coeffs: tuple = ()

    def __post_init__(self):
        lv = tuple(float(v) for v in self.levels)
        object.__setattr__(self, "levels", lv)
        if len(lv) < 2:
            raise DomainError("threshold table needs at least two levels")
        diffs = np.diff(lv)
        if not np.all(diffs < 0.0):
            raise DomainError("levels must be strictly decreasing with index")
        if self.temp_coeffs and len(self.temp_coeffs) != len(lv):
            raise DomainError("temp_coeffs length must match levels")

    @property
    def memory_window(self) -> float:
        """Separation between the erased state and the first programmed one."""
        return self.levels[0] - self.levels[1]

    def vth_at(self, level: int, t_kelvin: float, fallback_coeff: float) -> float:
        coeff = self.temp_coeffs[level] if self.temp_coeffs else fallback_coeff
        return vth_at_temperature(self.levels[level], coeff, t_kelvin)

    @classmethod
    def build(
        cls,
        level0: float | None,
        level1: float,
        mlc_span: float = 0.5,
        n_levels: int = 8,
        temp_coeffs: tuple = (),
        write_base: float = 4.0,
        write_step: float = 0.13,
        memory_window: float = 1.3,
    ) -> "VthTable":
        """Construct a table from the erased / first-programmed thresholds.

        With ``level0`` omitted the erased state sits one nominal memory
        window (default 1.3 V) above level 1. Levels 1..n-1 are spaced
        evenly across ``mlc_span`` volts below level 1. Write pulses:
        -write_base erases to level 0; +write_base programs level 1; each
        further level adds ``write_step`` volts.
        """
        if n_levels < 2:
            raise DomainError("need at least two levels")
        if level0 is None:
            level0 = level1 + memory_window
        levels = [level0, level1]
        if n_levels > 2:
            step = mlc_span / (n_levels - 2)
            for k in range(2, n_levels):
                levels.append(level1 - step * (k - 1))
        wmap = [(-write_base, 0)]
        for k in range(1, n_levels):
            wmap.append((write_base + write_step * (k - 1), k))
        return cls(levels=tuple(levels), write_voltage_map=tuple(wmap),
                   temp_coeffs=tuple(temp_coeffs))


WRITE_PULSE_TOLERANCE_V = 0.010


def program_level(write_pulse: float, table: VthTable) -> int:
    """Map a write-pulse amplitude to the threshold level it programs.

    Nearest-amplitude match within a 10 mV tolerance; anything else is an
    unmapped pulse.
    """
    best_level = None
    best_err = math.inf
    for amplitude, level in table.write_voltage_map:
        err = abs(write_pulse - amplitude)
        if err < best_err:
            best_err = err
            best_level = level
    if best_level is None or best_err > WRITE_PULSE_TOLERANCE_V:
        raise UnmappedPulseError(
            f"write pulse {write_pulse:+.3f} V does not match any level "
            f"(tolerance {WRITE_PULSE_TOLERANCE_V * 1e3:.0f} mV)"
        )
    return best_level


# ---------------------------------------------------------------------------
# Shipped cell design point
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CellDesign:
    """Every device-level knob the 2FeFET-1T cell simulation consumes.

    The two ferroelectric transistors share ``fefet`` and ``vth_table``;
    ``m2_vth_offset`` is a static design offset on the lower device (the
    sizing/threshold trim the cell is tuned with). ``mosfet_vth`` is the
    output transistor threshold at 300.15 K.
    """

    fefet: DeviceParams
    mosfet: DeviceParams
    vth_table: VthTable
    mosfet_vth: float
    m2_vth_offset: float = 0.0

    def with_fit(self, i_s: float, xi: float) -> "CellDesign":
        return replace(
            self,
            fefet=replace(self.fefet, i_s=i_s, xi=xi),
            mosfet=replace(self.mosfet, i_s=i_s, xi=xi),
        )


def default_design() -> CellDesign:
    """Shipped design point, tuned so the calibrated cell reproduces the
    reference on-resistance / on-off ratio and the temperature and
    variation behavior documented in the README."""
    from . import shipped

    return shipped.DESIGN
