"""Columns of cells on a shared source line: analog MAC accumulation,
temperature envelopes, noise-margin metrics, Monte Carlo variation, and
the single-FeFET-plus-resistor comparison baseline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import adc as adc_mod
from .cell import BiasConfig, effective_vths, node_and_output
from .constants import T_MAX_K, T_MIN_K, T_REF_K
from .devices import CellDesign, DomainError, thermal_voltage
from . import kernels


class ShapeError(ValueError):
    """Cells, inputs, and variation vectors must agree in length."""


class UndefinedRatioError(ValueError):
    """Noise-margin improvement is undefined for denominators <= 0."""


@dataclass(frozen=True)
class ArrayConfig:
    rows: int = 8
    cols: int = 1
    bits_per_cell: int = 2
    bias: BiasConfig = field(default_factory=BiasConfig)
    adc_sharing: int = 8

    def __post_init__(self):
        if not 8 <= self.rows <= 256:
            raise DomainError(f"rows must be within 8..256, got {self.rows}")
        if self.cols < 1:
            raise DomainError("cols must be >= 1")
        if self.adc_sharing < 1:
            raise DomainError("adc_sharing must be >= 1")


def default_t_grid(n_points: int = 18, t_lo: float = T_MIN_K, t_hi: float = T_MAX_K):
    """Uniform temperature grid over the supported sweep, inclusive."""
    return np.linspace(t_lo, t_hi, n_points)


def column_mac(cells, inputs, t_kelvin: float, design: CellDesign,
               bias: BiasConfig | None = None, variations=None) -> float:
    """Aggregate SL current of one column: linear superposition of the
    per-cell outputs (virtual-ground SL, no IR drop)."""
    bias = bias or BiasConfig()
    cells = list(cells)
    inputs = np.asarray(inputs, dtype=np.int64)
    n = len(cells)
    if inputs.shape != (n,):
        raise ShapeError(f"{n} cells but {inputs.shape} inputs")
    if variations is None:
        variations = np.zeros((n, 3), dtype=np.float64)
    else:
        variations = np.asarray(variations, dtype=np.float64)
        if variations.shape != (n, 3):
            raise ShapeError(f"variations must have shape ({n}, 3)")

    vth1 = np.empty(n)
    vth2 = np.empty(n)
    vth3 = np.empty(n)
    for i, state in enumerate(cells):
        vth1[i], vth2[i], vth3[i] = effective_vths(
            state, t_kelvin, design, variations[i]
        )
    wl1 = np.where(inputs > 0, bias.v_read, bias.v_wl_off)
    wl2 = np.full(n, bias.v_read)
    _, isl = node_and_output(vth1, vth2, vth3, wl1, wl2, bias, t_kelvin, design)
    return float(np.sum(isl))


@dataclass(frozen=True)
class MacLevelSet:
    """Per active-row count k: output-current envelope over a temperature
    grid plus the nominal (reference-temperature) value."""

    rows: int
    digit: int
    t_grid: tuple
    i_min: tuple
    i_max: tuple
    nominal: tuple

    def to_csv(self, nmr: "NmrReport | None" = None) -> str:
        lines = ["k,t_min_current_a,t_max_current_a,nominal_a,nmr"]
        for k in range(self.rows + 1):
            nmr_val = ""
            if nmr is not None and k >= 1:
                nmr_val = f"{nmr.per_boundary[k - 1]:.6f}"
            lines.append(
                f"{k},{self.i_min[k]:.9e},{self.i_max[k]:.9e},"
                f"{self.nominal[k]:.9e},{nmr_val}"
            )
        return "\n".join(lines) + "\n"


def enumerate_mac_levels(cfg: ArrayConfig, digit: int, t_grid,
                         design: CellDesign,
                         t_ref: float = T_REF_K) -> MacLevelSet:
    """Column MAC envelope for k = 0..rows active inputs, all cells of the
    column storing the same digit (the uniform-state assumption used by
    the resilience study)."""
    from .cell import encode_state

    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=np.float64))
    state = encode_state(digit, cfg.bits_per_cell)
    bias = cfg.bias
    rows = cfg.rows

    def on_off_at(t):
        vth1, vth2, vth3 = effective_vths(state, float(t), design)
        wl_on, wl2 = bias.wl_voltages(1)
        wl_off, _ = bias.wl_voltages(0)
        _, i_on = node_and_output(vth1, vth2, vth3, wl_on, wl2, bias, float(t), design)
        _, i_off = node_and_output(vth1, vth2, vth3, wl_off, wl2, bias, float(t), design)
        return float(i_on), float(i_off)

    ks = np.arange(rows + 1)
    i_min = np.full(rows + 1, np.inf)
    i_max = np.full(rows + 1, -np.inf)
    for t in t_grid:
        i_on, i_off = on_off_at(t)
        col = ks * i_on + (rows - ks) * i_off
        i_min = np.minimum(i_min, col)
        i_max = np.maximum(i_max, col)
    i_on, i_off = on_off_at(t_ref)
    nominal = ks * i_on + (rows - ks) * i_off
    return MacLevelSet(
        rows=rows,
        digit=digit,
        t_grid=tuple(float(t) for t in t_grid),
        i_min=tuple(i_min),
        i_max=tuple(i_max),
        nominal=tuple(nominal),
    )


SPREAD_FLOOR_A = 1e-12


@dataclass(frozen=True)
class NmrReport:
    """Noise-margin rate per boundary: the guard gap between adjacent count
    levels normalized by the upper level's own temperature spread. Negative
    values flag overlap."""

    per_boundary: tuple
    nmr_min: float
    argmin_boundary: int

    def to_json_dict(self) -> dict:
        return {
            "nmr": list(self.per_boundary),
            "nmr_min": self.nmr_min,
            "argmin_boundary": self.argmin_boundary,
        }


def compute_nmr(levels: MacLevelSet) -> NmrReport:
    """NMR_k = (min_T L_k - max_T L_{k-1}) / (max_T L_k - min_T L_k) for
    k = 1..rows; a spread floor keeps single-temperature grids finite."""
    if levels.rows < 1:
        raise DomainError("need at least one boundary")
    vals = []
    for k in range(1, levels.rows + 1):
        gap = levels.i_min[k] - levels.i_max[k - 1]
        spread = max(levels.i_max[k] - levels.i_min[k], SPREAD_FLOOR_A)
        vals.append(gap / spread)
    arr = np.asarray(vals)
    argmin = int(np.argmin(arr)) + 1
    return NmrReport(
        per_boundary=tuple(float(v) for v in arr),
        nmr_min=float(arr.min()),
        argmin_boundary=argmin,
    )


def nmr_improvement(nmr_new: float, nmr_old: float) -> float:
    """(new + 1) / (old + 1); quantifies a resilience gain between designs."""
    if nmr_old + 1.0 <= 0.0:
        raise UndefinedRatioError(
            f"improvement undefined for reference nmr {nmr_old} <= -1"
        )
    return (nmr_new + 1.0) / (nmr_old + 1.0)


# ---------------------------------------------------------------------------
# single-FeFET-plus-resistor baseline
# ---------------------------------------------------------------------------

def baseline_1f1r_output(state_on: bool, input_bit: int, t_kelvin: float,
                         r_load_ohms: float, design: CellDesign,
                         bias: BiasConfig | None = None) -> float:
    """Output current of one FeFET in series with a fixed load resistor to
    the supply; comparison baseline for fluctuation and noise-margin
    ratios. Binary states only."""
    bias = bias or BiasConfig()
    level = 1 if state_on else 0
    vth = design.vth_table.vth_at(level, t_kelvin, design.fefet.vth_temp_coeff)
    v_gate = bias.v_read if input_bit else bias.v_wl_off
    v_t = thermal_voltage(t_kelvin)
    supply = bias.v_bl
    fe = design.fefet
    lo, hi = 0.0, supply
    for _ in range(kernels.BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        i_dev = float(kernels.device_current(v_gate, mid, vth, fe.gain, fe.xi, v_t))
        i_res = (supply - mid) / r_load_ohms
        if i_dev > i_res:
            hi = mid
        else:
            lo = mid
    v_d = 0.5 * (lo + hi)
    return (supply - v_d) / r_load_ohms


def baseline_1f1r_fluctuation(t_grid, r_load_ohms: float, design: CellDesign,
                              bias: BiasConfig | None = None,
                              t_ref: float = T_REF_K) -> float:
    """Worst relative deviation of the baseline ON current from its
    reference-temperature value."""
    i_ref = baseline_1f1r_output(True, 1, t_ref, r_load_ohms, design, bias)
    worst = 0.0
    for t in np.atleast_1d(np.asarray(t_grid, dtype=np.float64)):
        i_t = baseline_1f1r_output(True, 1, float(t), r_load_ohms, design, bias)
        worst = max(worst, abs(i_t - i_ref) / i_ref)
    return worst


# ---------------------------------------------------------------------------
# Monte Carlo variation study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonteCarloReport:
    digit: int
    runs: int
    sigma_vt: float
    seed: int
    t_kelvin: float
    decision_accuracy: float
    per_k_accuracy: tuple
    column_rel_sigma: float
    cell_rel_sigma: float
    cell_mean_a: float
    nominal_codes: tuple

    def to_json_dict(self) -> dict:
        return {
            "digit": self.digit,
            "runs": self.runs,
            "sigma_vt_v": self.sigma_vt,
            "seed": self.seed,
            "temperature_k": self.t_kelvin,
            "decision_accuracy": self.decision_accuracy,
            "per_k_accuracy": list(self.per_k_accuracy),
            "column_rel_sigma": self.column_rel_sigma,
            "cell_rel_sigma": self.cell_rel_sigma,
            "cell_mean_a": self.cell_mean_a,
            "nominal_codes": list(self.nominal_codes),
        }


def monte_carlo_mac(cfg: ArrayConfig, digit: int, runs: int, sigma_vt: float,
                    seed: int, t_kelvin: float, design: CellDesign,
                    adc_cfg: adc_mod.AdcConfig | None = None,
                    sigma_vt_mosfet: float = 0.0) -> MonteCarloReport:
    """Seeded device-variation study of one column plus its converter.

    Each run draws independent threshold shifts per ferroelectric
    transistor (and optionally per output transistor), evaluates the
    column MAC for every active-row count, converts with the ADC, and
    scores the codes against the variation-free nominal ones. Run i uses
    an RNG stream spawned from (seed, i), so any evaluation order gives
    identical results.
    """
    from .cell import encode_state

    if runs < 1:
        raise DomainError("runs must be >= 1")
    state = encode_state(digit, cfg.bits_per_cell)
    bias = cfg.bias
    rows = cfg.rows

    nominal_levels = enumerate_mac_levels(
        cfg, digit, np.asarray([t_kelvin]), design, t_ref=t_kelvin
    ).nominal
    if adc_cfg is None:
        binary_levels = enumerate_mac_levels(
            cfg, 1, np.asarray([t_kelvin]), design, t_ref=t_kelvin
        ).nominal
        adc_cfg = adc_mod.design_references(binary_levels, bits=3)
    nominal_codes = tuple(
        adc_mod.flash_convert(i, adc_cfg) for i in nominal_levels
    )

    vth1_0, vth2_0, vth3_0 = effective_vths(state, t_kelvin, design)
    wl_on, wl2_v = bias.wl_voltages(1)
    wl_off, _ = bias.wl_voltages(0)

    streams = np.random.SeedSequence(seed).spawn(runs)
    ks = np.arange(rows + 1)
    correct = np.zeros(rows + 1, dtype=np.int64)
    col_currents = np.empty((runs, rows + 1))
    cell_currents = np.empty((runs, rows))

    for r in range(runs):
        rng = np.random.default_rng(streams[r])
        d_fe = rng.normal(0.0, sigma_vt, (rows, 2)) if sigma_vt > 0 else np.zeros((rows, 2))
        if sigma_vt_mosfet > 0:
            d_mos = rng.normal(0.0, sigma_vt_mosfet, rows)
        else:
            d_mos = np.zeros(rows)
        vth1 = vth1_0 + d_fe[:, 0]
        vth2 = vth2_0 + d_fe[:, 1]
        vth3 = vth3_0 + d_mos
        wl1 = np.full(rows, wl_on)
        wl2 = np.full(rows, wl2_v)
        _, i_on = node_and_output(vth1, vth2, vth3, wl1, wl2, bias, t_kelvin, design)
        _, i_off = node_and_output(
            vth1, vth2, vth3, np.full(rows, wl_off), wl2, bias, t_kelvin, design
        )
        cell_currents[r] = i_on
        # Active rows are filled in index order for count k.
        cum_on = np.concatenate([[0.0], np.cumsum(i_on)])
        cum_off = np.concatenate([[0.0], np.cumsum(i_off)])
        col = cum_on[ks] + (cum_off[rows] - cum_off[ks])
        col_currents[r] = col
        codes = adc_mod.convert_many(col, adc_cfg)
        correct += codes == np.asarray(nominal_codes)

    per_k = correct / runs
    col_mu = col_currents[:, rows].mean()
    cell_mu = cell_currents.mean()
    if sigma_vt > 0.0 or sigma_vt_mosfet > 0.0:
        col_sd = col_currents[:, rows].std()
        cell_sd = cell_currents.std()
    else:
        col_sd = 0.0
        cell_sd = 0.0
    return MonteCarloReport(
        digit=digit,
        runs=runs,
        sigma_vt=sigma_vt,
        seed=seed,
        t_kelvin=t_kelvin,
        decision_accuracy=float(per_k.mean()),
        per_k_accuracy=tuple(float(x) for x in per_k),
        column_rel_sigma=float(col_sd / col_mu),
        cell_rel_sigma=float(cell_sd / cell_mu),
        cell_mean_a=float(cell_mu),
        nominal_codes=nominal_codes,
    )
