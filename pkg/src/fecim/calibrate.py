"""Fit the cell's current scale and slope factor to measured targets.

The fit reproduces two figures of the assembled cell at 27 C: the
v_read-referred on-resistance of the fully-on state and the on/off current
ratio between the lowest programmed digit and the erased digit. The ratio
is independent of the shared current scale (it cancels in the node
balance), so a nested bisection applies: bisect xi against the ratio, then
set i_s in closed form from the on-current.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cell import BiasConfig, cell_output_current, encode_state
from .constants import T_REF_K
from .devices import CellDesign, DomainError


class CalibrationError(RuntimeError):
    """Fit did not converge; carries the best residual reached."""

    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


@dataclass(frozen=True)
class CalibrationTargets:
    on_off_ratio: float = 238.0
    r_on_ohms: float = 118e3
    v_read: float = 0.35

    def __post_init__(self):
        if min(self.on_off_ratio, self.r_on_ohms, self.v_read) <= 0.0:
            raise DomainError("calibration targets must be positive")


@dataclass(frozen=True)
class CalibrationResult:
    design: CellDesign
    i_s: float
    xi: float
    ratio_residual: float
    r_on_residual: float
    iterations: int

    @property
    def max_residual(self) -> float:
        return max(abs(self.ratio_residual), abs(self.r_on_residual))


def _cell_figures(design: CellDesign, bias: BiasConfig, t: float):
    """(on-current, on/off ratio) of the assembled cell at temperature t."""
    on = cell_output_current(encode_state(1, 2), 1, bias, t, design)
    off = cell_output_current(encode_state(0, 2), 1, bias, t, design)
    return on, on / off


def calibrate_cell(
    targets: CalibrationTargets,
    design: CellDesign | None = None,
    t_kelvin: float = T_REF_K,
    xi_bounds: tuple = (1.0, 4.0),
    max_iter: int = 80,
    tol: float = 1e-6,
) -> CalibrationResult:
    """Fit (i_s, xi) so the cell meets the on-resistance and on/off targets.

    Raises CalibrationError when the ratio cannot be bracketed within the
    slope-factor bounds or the residual stays above tolerance.
    """
    if design is None:
        from .devices import default_design

        design = default_design()

    bias = BiasConfig(v_read=targets.v_read)
    i_target = targets.v_read / targets.r_on_ohms

    def ratio_at(xi: float) -> float:
        _, ratio = _cell_figures(design.with_fit(design.fefet.i_s, xi), bias, t_kelvin)
        return ratio

    lo, hi = xi_bounds
    r_lo = ratio_at(lo)
    r_hi = ratio_at(hi)
    want = targets.on_off_ratio
    if (r_lo - want) * (r_hi - want) > 0.0:
        best = min(abs(r_lo / want - 1.0), abs(r_hi / want - 1.0))
        raise CalibrationError(
            f"on/off ratio {want} not reachable for xi in [{lo}, {hi}]", best
        )
    # The ratio is monotone in xi across the supported design space;
    # orient the bracket accordingly.
    descending = r_lo > r_hi
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        mid = 0.5 * (lo + hi)
        r_mid = ratio_at(mid)
        if abs(r_mid / want - 1.0) < tol:
            lo = hi = mid
            break
        if (r_mid > want) == descending:
            lo = mid
        else:
            hi = mid
    xi_fit = 0.5 * (lo + hi)

    # Output current is exactly linear in the shared current scale.
    probe = design.with_fit(design.fefet.i_s, xi_fit)
    on_probe, _ = _cell_figures(probe, bias, t_kelvin)
    i_s_fit = design.fefet.i_s * (i_target / on_probe)

    fitted = design.with_fit(i_s_fit, xi_fit)
    on, ratio = _cell_figures(fitted, bias, t_kelvin)
    result = CalibrationResult(
        design=fitted,
        i_s=i_s_fit,
        xi=xi_fit,
        ratio_residual=ratio / want - 1.0,
        r_on_residual=(targets.v_read / on) / targets.r_on_ohms - 1.0,
        iterations=iterations,
    )
    if result.max_residual > 0.01:
        raise CalibrationError("calibration residual above 1 %", result.max_residual)
    return result
