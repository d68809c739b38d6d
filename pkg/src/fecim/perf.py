"""Analytical energy / latency / area estimator for array-based inference.

This is accounting, not a gate-level model: per-operation energies ship in
the "calibrated-45nm" constants set, reverse-fitted so the calibrated anchors
hold (mux-group read 1.36 pJ on the 8-row cell-study array; 3.355 pJ array
+ 7.40 pJ converter for a full 128-row, 8-column operation; the two
system-level efficiency points). Every constant can be overridden.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .devices import DomainError
from .array import ArrayConfig
from .nn import MappedNetwork


@dataclass(frozen=True)
class LayerShape:
    """Op-count description of one mapped layer: fan-in rows, output
    neurons, and spatial positions the weight matrix is applied to."""

    fan_in: int
    out_features: int
    positions: int = 1

    @property
    def macs(self) -> int:
        return self.fan_in * self.out_features * self.positions


# Layer table of the reference convolutional stack used for the op-count
# model behind the shipped efficiency anchors.
REFERENCE_STACK = (
    LayerShape(27, 64, 1024),
    LayerShape(1152, 128, 1024),
    LayerShape(1152, 256, 256),
    LayerShape(2304, 256, 256),
    LayerShape(2304, 512, 64),
    LayerShape(4608, 512, 64),
    LayerShape(8192, 8192, 1),
    LayerShape(8192, 10, 1),
)


@dataclass(frozen=True)
class PerfConstants:
    """Per-operation energies (J), activity factors, and area units."""

    # converter: flash comparator energy per conversion event
    e_comparator: float
    # column read energy: base + per-row term
    e_col_base: float
    e_col_per_row: float
    e_write_pulse: float = 1.0e-13
    # digital component energies per event
    e_adder: float = 1.8e-13
    e_dff: float = 1.2e-13
    e_switch: float = 8.0e-14
    e_ctrl: float = 2.0e-13
    # activity factors
    alpha_wiring: float = 1.44
    gamma_dff: float = 0.25
    delta_adder: float = 0.20
    theta_switch: float = 0.50
    epsilon_ctrl: float = 0.05
    # fraction of read cycles actually asserted (input bit sparsity seen
    # by the row controller)
    input_activity: float = 1.0
    # fixed per-inference controller/clock energy
    e_fixed_per_inference: float = 0.0
    # interconnect overhead as a fraction of digital energy
    interconnect_frac: float = 0.10
    clock_period_s: float = 1.0e-9
    # area units (square micrometers), 45 nm-class defaults
    feature_size_m: float = 45e-9
    cell_area_f2: float = 60.0
    comparator_area_f2: float = 1200.0
    level_shifter_area_f2: float = 500.0
    decoder_area_per_col_f2: float = 200.0
    tile_control_area_f2: float = 2.0e5

    def __post_init__(self):
        for name in ("gamma_dff", "delta_adder", "theta_switch",
                     "epsilon_ctrl", "input_activity"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must be within [0, 1], got {v}")

    def e_col(self, rows: int) -> float:
        return self.e_col_base + rows * self.e_col_per_row

    def e_adc(self, bits: int) -> float:
        return ((1 << bits) - 1) * self.e_comparator

    def scaled(self, factor: float) -> "PerfConstants":
        return replace(
            self,
            e_comparator=self.e_comparator * factor,
            e_col_base=self.e_col_base * factor,
            e_col_per_row=self.e_col_per_row * factor,
            e_write_pulse=self.e_write_pulse * factor,
            e_adder=self.e_adder * factor,
            e_dff=self.e_dff * factor,
            e_switch=self.e_switch * factor,
            e_ctrl=self.e_ctrl * factor,
            e_fixed_per_inference=self.e_fixed_per_inference * factor,
        )


# Anchors the shipped constants are fitted to.
ANCHOR_GROUP_READ_8ROW_3BIT = 1.36e-12
ANCHOR_ARRAY_128x8 = 3.355e-12
ANCHOR_ADC_128x8_5BIT = 7.40e-12
ANCHOR_TOPS_PER_W_2BIT = 48.03
ANCHOR_TOPS_PER_W_1BIT = 26.06
_SYSTEM_ROWS = 128
_SYSTEM_ADC_BITS = 5
_GROUP_COLS = 8


def _reference_read_cycles(bits_per_cell: int, rows: int) -> int:
    return count_read_cycles(REFERENCE_STACK, bits_per_cell, rows)


def calibrated_45nm() -> PerfConstants:
    """Constants fitted to the shipped energy anchors.

    The comparator and column-read terms come directly from the anchored
    per-operation energies; the sparsity activity factor and the fixed
    per-inference term are then solved so the reference stack lands on
    both system efficiency points exactly.
    """
    e_cmp = ANCHOR_ADC_128x8_5BIT / (_GROUP_COLS * ((1 << _SYSTEM_ADC_BITS) - 1))
    e_col_128 = ANCHOR_ARRAY_128x8 / _GROUP_COLS
    e_col_8 = (ANCHOR_GROUP_READ_8ROW_3BIT - 7.0 * e_cmp) / _GROUP_COLS
    slope = (e_col_128 - e_col_8) / (_SYSTEM_ROWS - 8)
    base = e_col_8 - 8 * slope

    c = PerfConstants(e_comparator=e_cmp, e_col_base=base, e_col_per_row=slope)

    macs = sum(l.macs for l in REFERENCE_STACK)
    ops = 2.0 * macs
    e2_target = ops / (ANCHOR_TOPS_PER_W_2BIT * 1e12)
    e1_target = ops / (ANCHOR_TOPS_PER_W_1BIT * 1e12)
    reads_2b = _reference_read_cycles(2, _SYSTEM_ROWS)

    u_digital = (c.delta_adder * c.e_adder + c.gamma_dff * c.e_dff
                 + c.theta_switch * c.e_switch + c.epsilon_ctrl * c.e_ctrl)
    per_read = (c.e_col(_SYSTEM_ROWS) + c.e_adc(_SYSTEM_ADC_BITS)
                + (1.0 + c.interconnect_frac) * u_digital)
    p_prop = e1_target - e2_target
    activity = p_prop / (reads_2b * per_read)
    e_fixed = (2.0 * e2_target - e1_target) / (1.0 + c.interconnect_frac)
    if not 0.0 < activity <= 1.0 or e_fixed < 0.0:
        raise DomainError("anchor fit produced an unusable activity split")
    return replace(c, input_activity=activity, e_fixed_per_inference=e_fixed)


def dump_constants(c: PerfConstants) -> str:
    """Constants set in the structured-text configuration format."""
    import configparser
    import dataclasses
    import io

    parser = configparser.ConfigParser()
    parser["perf_constants"] = {
        f.name: repr(getattr(c, f.name)) for f in dataclasses.fields(c)
    }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def load_constants(path) -> PerfConstants:
    """Read a constants file written by dump_constants; missing keys fall
    back to the shipped fitted set."""
    import configparser
    import dataclasses

    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read or not parser.has_section("perf_constants"):
        raise DomainError(f"no [perf_constants] section in {path}")
    base = calibrated_45nm()
    kwargs = {}
    for f in dataclasses.fields(PerfConstants):
        if parser.has_option("perf_constants", f.name):
            kwargs[f.name] = float(parser.get("perf_constants", f.name))
        else:
            kwargs[f.name] = getattr(base, f.name)
    return PerfConstants(**kwargs)


def op_energy(cfg: ArrayConfig, adc_bits: int, constants: PerfConstants) -> float:
    """Energy of one mux-group read: every column sharing the converter
    is read once and one conversion runs."""
    return (cfg.adc_sharing * constants.e_col(cfg.rows)
            + constants.e_adc(adc_bits))


def digital_energy(counts: dict, constants: PerfConstants) -> float:
    """Activity-weighted digital energy for the given event counts
    (keys: adders, dffs, switch_events, ctrl_cycles)."""
    c = constants
    total = (counts.get("adders", 0) * c.delta_adder * c.e_adder
             + counts.get("dffs", 0) * c.gamma_dff * c.e_dff
             + counts.get("switch_events", 0) * c.theta_switch * c.e_switch
             + counts.get("ctrl_cycles", 0) * c.epsilon_ctrl * c.e_ctrl)
    return total


def area_estimate(cfg: ArrayConfig, constants: PerfConstants,
                  adc_bits: int = _SYSTEM_ADC_BITS) -> float:
    """Tile area in square micrometers: cells plus converter, drivers
    (level shifters carry the wiring factor), decoders, and control."""
    c = constants
    f2 = (c.feature_size_m * 1e6) ** 2  # um^2 per F^2
    cells = cfg.rows * cfg.cols * c.cell_area_f2
    adcs = (cfg.cols / cfg.adc_sharing) * ((1 << adc_bits) - 1) * c.comparator_area_f2
    shifters = cfg.rows * c.level_shifter_area_f2 * c.alpha_wiring
    decoders = cfg.cols * c.decoder_area_per_col_f2
    control = c.tile_control_area_f2
    return (cells + adcs + shifters + decoders + control) * f2


def count_read_cycles(layers, bits_per_cell: int, rows: int) -> int:
    """Raw column-read cycles for one pass: pulses x digit columns x row
    groups x spatial positions, before sparsity gating."""
    if 8 % bits_per_cell != 0:
        raise DomainError("bits_per_cell must divide the 8-bit weights")
    n_digits = 8 // bits_per_cell
    total = 0
    for l in layers:
        shape = l if isinstance(l, LayerShape) else LayerShape(*l)
        groups = -(-shape.fan_in // rows)
        total += shape.out_features * n_digits * 8 * groups * shape.positions
    return total


@dataclass(frozen=True)
class PerfReport:
    total_energy_j: float
    breakdown: dict
    latency_s: float
    area_um2: float
    tops_per_watt: float
    macs: int
    read_cycles: int
    samples: int

    def to_json_dict(self) -> dict:
        return {
            "total_energy_j": self.total_energy_j,
            "breakdown_j": dict(self.breakdown),
            "latency_s": self.latency_s,
            "area_um2": self.area_um2,
            "tops_per_watt": self.tops_per_watt,
            "macs": self.macs,
            "read_cycles": self.read_cycles,
            "samples": self.samples,
        }


def _as_layer_shapes(net) -> tuple:
    if isinstance(net, MappedNetwork):
        return tuple(
            LayerShape(l.in_features, l.out_features, 1) for l in net.layers
        ), net.bits_per_cell
    return tuple(
        l if isinstance(l, LayerShape) else LayerShape(*l) for l in net
    ), None


def workload_perf(net, n_samples: int, cfg: ArrayConfig,
                  constants: PerfConstants,
                  adc_bits: int = _SYSTEM_ADC_BITS,
                  bits_per_cell: int | None = None,
                  input_activity: float | None = None) -> PerfReport:
    """Energy/latency/area of running the workload ``n_samples`` times.

    ``net`` is a MappedNetwork or an iterable of LayerShape entries (the
    latter carries no cell precision, so pass ``bits_per_cell``).
    ``input_activity`` overrides the constants' sparsity factor, e.g. a
    measured fraction from sparsity_schedule groups.
    """
    layers, net_bits = _as_layer_shapes(net)
    b = bits_per_cell or net_bits
    if b is None:
        raise DomainError("bits_per_cell required for shape-only workloads")
    if n_samples < 1:
        raise DomainError("need at least one sample")

    c = constants
    act = c.input_activity if input_activity is None else input_activity
    cycles = count_read_cycles(layers, b, cfg.rows)
    active_reads = cycles * act * n_samples

    e_array = active_reads * c.e_col(cfg.rows)
    e_adc = active_reads * c.e_adc(adc_bits)
    counts = {
        "adders": active_reads,
        "dffs": active_reads,
        "switch_events": active_reads,
        "ctrl_cycles": active_reads,
    }
    e_dig_raw = digital_energy(counts, c) + c.e_fixed_per_inference * n_samples
    # split: control share stays visible in the breakdown
    e_ctrl_part = (counts["ctrl_cycles"] * c.epsilon_ctrl * c.e_ctrl
                   + c.e_fixed_per_inference * n_samples)
    e_dig_part = e_dig_raw - e_ctrl_part
    scale = 1.0 + c.interconnect_frac
    breakdown = {
        "array": e_array,
        "adc": e_adc,
        "digital": e_dig_part * scale,
        "control": e_ctrl_part * scale,
    }
    total = sum(breakdown.values())

    macs = sum(l.macs for l in layers) * n_samples
    tops_per_watt = (2.0 * macs) / total / 1e12 if total > 0 else float("inf")

    latency = 0.0
    for l in layers:
        groups = -(-l.fan_in // cfg.rows)
        latency += 8 * groups * cfg.adc_sharing * l.positions * c.clock_period_s
    latency *= n_samples

    return PerfReport(
        total_energy_j=total,
        breakdown=breakdown,
        latency_s=latency,
        area_um2=area_estimate(cfg, c, adc_bits),
        tops_per_watt=tops_per_watt,
        macs=macs,
        read_cycles=cycles * n_samples,
        samples=n_samples,
    )
