"""Physical constants and reference conditions used across the simulator."""

BOLTZMANN_J_PER_K = 1.380649e-23
ELEMENTARY_CHARGE_C = 1.602177e-19

# Reference temperature for parameter extraction (27 C).
T_REF_K = 300.15

# Supported sweep range, 0 C .. 85 C.
T_MIN_K = 273.15
T_MAX_K = 358.15


def celsius_to_kelvin(t_c: float) -> float:
    return t_c + 273.15


def kelvin_to_celsius(t_k: float) -> float:
    return t_k - 273.15
