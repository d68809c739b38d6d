"""The 2FeFET-1T cell: state encoding, internal node solve, and source-line
output current.

Topology: DL - M1 - V_S - M2 - GND, with the output transistor M3 driven by
V_S and sourcing current from BL into the (virtual-ground) SL. M1's gate is
WL1, M2's gate WL2. Input 1 reads with both word lines at v_read; input 0
holds WL1 at v_wl_off so the cell contributes only a leakage floor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .constants import T_REF_K
from .devices import CellDesign, DomainError, thermal_voltage


class EncodingError(ValueError):
    """Stored digit outside the range representable by the cell."""


class SolverError(RuntimeError):
    """Node solve could not bracket a balance point (broken device setup)."""


@dataclass(frozen=True)
class BiasConfig:
    """Read-path bias voltages (volts)."""

    v_dl: float = 0.4
    v_bl: float = 1.0
    v_read: float = 0.35
    v_wl_off: float = -0.3
    v_sl: float = 0.0

    def __post_init__(self):
        if not (self.v_bl > self.v_dl > 0.0):
            raise DomainError(
                f"require v_bl > v_dl > 0, got v_bl={self.v_bl}, v_dl={self.v_dl}"
            )

    def wl_voltages(self, input_bit: int) -> tuple:
        """(WL1, WL2) for a read with the given input bit."""
        if input_bit:
            return (self.v_read, self.v_read)
        return (self.v_wl_off, self.v_read)


@dataclass(frozen=True)
class CellState:
    """Threshold-level assignment of the two ferroelectric transistors
    encoding one stored digit."""

    stored_digit: int
    m1_level: int
    m2_level: int
    bits_per_cell: int


def encode_state(digit: int, bits_per_cell: int = 2) -> CellState:
    """Map a stored digit to the per-transistor threshold levels.

    Digit 0 parks M1 in the erased (highest-threshold) state with M2
    programmed; digit 1 programs both; digit X >= 2 programs M1 to the
    (X-1)-th level and erases M2.
    """
    if bits_per_cell not in (1, 2, 3):
        raise EncodingError(f"bits_per_cell must be 1, 2 or 3, got {bits_per_cell}")
    if not 0 <= digit < (1 << bits_per_cell):
        raise EncodingError(
            f"digit {digit} out of range for {bits_per_cell}-bit cell"
        )
    if digit == 0:
        m1, m2 = 0, 1
    elif digit == 1:
        m1, m2 = 1, 1
    else:
        m1, m2 = digit - 1, 0
    return CellState(stored_digit=digit, m1_level=m1, m2_level=m2,
                     bits_per_cell=bits_per_cell)


# ---------------------------------------------------------------------------
# batch evaluation (the hot path; array and Monte Carlo layers feed this)
# ---------------------------------------------------------------------------

def effective_vths(state: CellState, t_kelvin: float, design: CellDesign,
                   dvth=(0.0, 0.0, 0.0)) -> tuple:
    """Temperature-shifted thresholds of (M1, M2, M3) including the M2
    design offset and optional per-device variation deltas."""
    tab = design.vth_table
    fe_coeff = design.fefet.vth_temp_coeff
    vth1 = tab.vth_at(state.m1_level, t_kelvin, fe_coeff) + dvth[0]
    vth2 = tab.vth_at(state.m2_level, t_kelvin, fe_coeff) + design.m2_vth_offset + dvth[1]
    vth3 = (design.mosfet_vth
            + design.mosfet.vth_temp_coeff * (t_kelvin - T_REF_K)
            + dvth[2])
    return vth1, vth2, vth3


def node_and_output(vth1_eff, vth2_eff, vth3_eff, wl1, wl2,
                    bias: BiasConfig, t_kelvin: float, design: CellDesign):
    """Solve V_S and the SL output current for broadcastable arrays of
    effective thresholds and word-line voltages."""
    if bias.v_dl <= 0.0:
        raise SolverError("node solve needs v_dl > 0 to bracket a balance")
    v_t = thermal_voltage(t_kelvin)
    fe = design.fefet
    vs = kernels.solve_vs(
        wl1, wl2, vth1_eff, vth2_eff,
        fe.gain, fe.gain, fe.xi, fe.xi,
        bias.v_dl, v_t,
    )
    isl = kernels.device_current(
        vs - bias.v_sl, bias.v_bl - bias.v_sl, vth3_eff,
        design.mosfet.gain, design.mosfet.xi, v_t,
    )
    return vs, isl


# ---------------------------------------------------------------------------
# scalar operations
# ---------------------------------------------------------------------------

def solve_node_voltage(state: CellState, input_bit: int, bias: BiasConfig,
                       t_kelvin: float, design: CellDesign,
                       dvth=(0.0, 0.0, 0.0)) -> float:
    """Internal node voltage V_S in [0, v_dl] balancing the two
    ferroelectric transistors for the given read."""
    vth1, vth2, vth3 = effective_vths(state, t_kelvin, design, dvth)
    wl1, wl2 = bias.wl_voltages(input_bit)
    vs, _ = node_and_output(vth1, vth2, vth3, wl1, wl2, bias, t_kelvin, design)
    return float(vs)


def cell_output_current(state: CellState, input_bit: int, bias: BiasConfig,
                        t_kelvin: float, design: CellDesign,
                        dvth=(0.0, 0.0, 0.0)) -> float:
    """SL current through the output transistor, SL held at virtual ground."""
    vth1, vth2, vth3 = effective_vths(state, t_kelvin, design, dvth)
    wl1, wl2 = bias.wl_voltages(input_bit)
    _, isl = node_and_output(vth1, vth2, vth3, wl1, wl2, bias, t_kelvin, design)
    return float(isl)


def m1_current_at_solution(state: CellState, input_bit: int, bias: BiasConfig,
                           t_kelvin: float, design: CellDesign,
                           dvth=(0.0, 0.0, 0.0)) -> float:
    """M1's own drain current at the solved node voltage.

    Reference for the compensation check: the full cell's output spread
    over temperature should stay below this current's spread for the
    non-clamped states.
    """
    vth1, vth2, vth3 = effective_vths(state, t_kelvin, design, dvth)
    wl1, wl2 = bias.wl_voltages(input_bit)
    vs, _ = node_and_output(vth1, vth2, vth3, wl1, wl2, bias, t_kelvin, design)
    v_t = thermal_voltage(t_kelvin)
    fe = design.fefet
    i_m1 = kernels.device_current(
        wl1 - vs, bias.v_dl - vs, vth1, fe.gain, fe.xi, v_t
    )
    return float(i_m1)


def temperature_fluctuation(state: CellState, t_grid, bias: BiasConfig,
                            design: CellDesign, t_ref: float = T_REF_K) -> float:
    """Worst relative deviation of the input-1 output current from its
    value at the reference temperature, over the grid."""
    i_ref = cell_output_current(state, 1, bias, t_ref, design)
    worst = 0.0
    for t in np.atleast_1d(np.asarray(t_grid, dtype=np.float64)):
        i_t = cell_output_current(state, 1, bias, float(t), design)
        worst = max(worst, abs(i_t - i_ref) / i_ref)
    return worst


def cell_iv_sweep(state: CellState, v_read_grid, t_kelvin: float,
                  bias: BiasConfig, design: CellDesign) -> np.ndarray:
    """Output current vs read voltage, word lines tied to the sweep value.

    Returns an array of shape (len(grid), 2) with columns (v_read, I_SL).
    """
    grid = np.atleast_1d(np.asarray(v_read_grid, dtype=np.float64))
    vth1, vth2, vth3 = effective_vths(state, t_kelvin, design)
    vs, isl = node_and_output(vth1, vth2, vth3, grid, grid, bias,
                              t_kelvin, design)
    return np.column_stack([grid, np.atleast_1d(isl)])
