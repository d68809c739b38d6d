"""Quantized inference mapped onto the simulated arrays: weight digit
decomposition, bit-serial activation pulses, shift-and-add accumulation,
sparsity-aware row scheduling, and variance-aware accuracy evaluation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import adc as adc_mod
from .cell import BiasConfig, encode_state, effective_vths, node_and_output
from .constants import T_REF_K
from .devices import CellDesign, DomainError


class MappingError(ValueError):
    """Weight decomposition produced an out-of-range cell digit."""


class FidelityMode(enum.Enum):
    IDEAL = "ideal-integer"
    ANALOG = "analog-device"
    STATISTICAL = "statistical-variance"


class SignHandling(enum.Enum):
    """How signed weights reach the unsigned cells. Only the offset scheme
    is implemented; the dual-column entry reserves the config name."""

    OFFSET = "offset"
    DUAL_COLUMN = "dual-column"


@dataclass(frozen=True)
class QuantizedTensor:
    values: np.ndarray
    scale: float
    zero_point: int = 0
    bits: int = 8
    signed: bool = True

    def dequantize(self) -> np.ndarray:
        return (self.values.astype(np.float64) - self.zero_point) * self.scale


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_tensor(x, bits: int = 8, symmetric: bool = True) -> QuantizedTensor:
    """Uniform quantization. Symmetric signed for weights; unsigned for
    activations (callers pass post-nonlinearity, non-negative data)."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DomainError("quantization input must be finite")
    if symmetric:
        qmax = (1 << (bits - 1)) - 1
        peak = float(np.max(np.abs(x))) if x.size else 0.0
        scale = peak / qmax if peak > 0.0 else 1.0
        vals = np.clip(_round_half_away(x / scale), -qmax, qmax)
        return QuantizedTensor(vals.astype(np.int64), scale, 0, bits, True)
    qmax = (1 << bits) - 1
    if np.any(x < 0.0):
        raise DomainError("unsigned quantization needs non-negative input")
    peak = float(np.max(x)) if x.size else 0.0
    scale = peak / qmax if peak > 0.0 else 1.0
    vals = np.clip(_round_half_away(x / scale), 0, qmax)
    return QuantizedTensor(vals.astype(np.int64), scale, 0, bits, False)


WEIGHT_OFFSET = 128


@dataclass(frozen=True)
class MappedLayer:
    """One layer's integer weights decomposed into per-cell digits.

    ``digits`` has shape (in_features, out_features, n_digits), least
    significant digit first; digit j carries significance (2**b)**j. The
    +128 offset made every stored value unsigned; it is subtracted
    digitally after accumulation.
    """

    digits: np.ndarray
    bits_per_cell: int
    weight_bits: int
    scale: float
    bias: np.ndarray | None = None

    @property
    def in_features(self) -> int:
        return self.digits.shape[0]

    @property
    def out_features(self) -> int:
        return self.digits.shape[1]

    @property
    def n_digits(self) -> int:
        return self.digits.shape[2]

    @property
    def significances(self) -> np.ndarray:
        base = 1 << self.bits_per_cell
        return base ** np.arange(self.n_digits, dtype=np.int64)

    def reconstruct_weights(self) -> np.ndarray:
        u = np.tensordot(self.digits, self.significances, axes=([2], [0]))
        return u - WEIGHT_OFFSET


@dataclass(frozen=True)
class MappedNetwork:
    layers: tuple
    bits_per_cell: int


def map_weights(w: QuantizedTensor, bits_per_cell: int,
                bias: np.ndarray | None = None) -> MappedLayer:
    """Offset-encode signed 8-bit weights and split them into base-2**b
    cell digits, least significant first."""
    if bits_per_cell not in (1, 2):
        raise MappingError(f"bits_per_cell must be 1 or 2, got {bits_per_cell}")
    if w.bits % bits_per_cell != 0:
        raise MappingError("weight bits must divide evenly into cell digits")
    vals = np.asarray(w.values, dtype=np.int64)
    if vals.ndim != 2:
        raise MappingError("expect a 2-D (in_features, out_features) weight matrix")
    u = vals + WEIGHT_OFFSET
    if np.any(u < 0) or np.any(u > 255):
        raise MappingError("offset-encoded weights out of the unsigned byte range")
    n_digits = w.bits // bits_per_cell
    base = 1 << bits_per_cell
    digits = np.empty(vals.shape + (n_digits,), dtype=np.int64)
    rem = u.copy()
    for j in range(n_digits):
        digits[..., j] = rem % base
        rem //= base
    if np.any(rem != 0):
        raise MappingError("decomposition left a nonzero remainder")
    return MappedLayer(digits=digits, bits_per_cell=bits_per_cell,
                       weight_bits=w.bits, scale=w.scale, bias=bias)


def bit_serial_pulses(a, msb_first: bool = False) -> np.ndarray:
    """Split 8-bit activations into eight binary pulse vectors.

    Returns shape (8, n); pulse p carries bit p of each activation
    (LSB first unless msb_first), weighted 2**p during accumulation.
    """
    a = np.atleast_1d(np.asarray(a, dtype=np.int64))
    if np.any(a < 0) or np.any(a > 255):
        raise DomainError("activations must be 8-bit unsigned")
    order = range(7, -1, -1) if msb_first else range(8)
    return np.stack([(a >> p) & 1 for p in order])


def pulse_significances(msb_first: bool = False) -> np.ndarray:
    order = range(7, -1, -1) if msb_first else range(8)
    return np.asarray([1 << p for p in order], dtype=np.int64)


def sparsity_schedule(pulse_bits, threshold: int):
    """Group the asserted ('1') positions of one pulse vector into
    parallel-assertion batches of at most ``threshold`` rows.

    Feeds the cycle counter of the performance model; the groups partition
    the asserted positions exactly, so MAC numerics are unaffected.
    """
    if threshold < 1:
        raise DomainError("threshold must be >= 1")
    idx = np.flatnonzero(np.asarray(pulse_bits, dtype=np.int64))
    return [idx[i:i + threshold] for i in range(0, idx.size, threshold)]


@dataclass(frozen=True)
class InferenceConfig:
    mode: FidelityMode = FidelityMode.IDEAL
    temperature_k: float = T_REF_K
    rows: int = 8
    adc_bits: int | None = None
    sigma_vt: float = 0.0
    # per-digit relative output sigma for the statistical mode
    sigma_table: dict = field(default_factory=dict)
    design: CellDesign | None = None
    bias_cfg: BiasConfig = field(default_factory=BiasConfig)
    msb_first: bool = False
    sign_handling: SignHandling = SignHandling.OFFSET

    def __post_init__(self):
        if (self.mode is FidelityMode.STATISTICAL and self.sigma_vt > 0.0
                and self.sigma_table):
            raise DomainError(
                "statistical mode takes exactly one noise source: either "
                "sigma_vt or the per-digit sigma table"
            )

    def resolved_design(self) -> CellDesign:
        if self.design is not None:
            return self.design
        from .devices import default_design

        return default_design()


# ---------------------------------------------------------------------------
# column evaluation backends
# ---------------------------------------------------------------------------

def _ideal_group_sums(digits_g, bits):
    """Exact integer column sums: digits_g (rows, out), bits (rows,)."""
    return np.tensordot(bits, digits_g, axes=([0], [0]))


class _AnalogColumnEvaluator:
    """Analog read-out of one row group: per-cell currents summed on the
    source line, then flash-converted against a count-decoding ladder.

    The ladder is built from the calibrated single-cell on/off currents,
    one reference per count boundary, so a group whose stored digits are
    binary decodes exactly; multibit digit columns inherit the ladder's
    uniform spacing and their residual nonlinearity shows up as
    quantization noise in the fidelity study.
    """

    def __init__(self, cfg: InferenceConfig, group_rows: int, max_digit: int):
        self.cfg = cfg
        design = cfg.resolved_design()
        self.design = design
        t = cfg.temperature_k
        bias = cfg.bias_cfg
        cell_bits = 1 if max_digit <= 1 else 2
        self.vths = {}
        for d in range(max_digit + 1):
            st = encode_state(d, cell_bits)
            self.vths[d] = effective_vths(st, t, design)
        wl_on, wl2 = bias.wl_voltages(1)
        wl_off, _ = bias.wl_voltages(0)
        self.wl_on, self.wl_off, self.wl2 = wl_on, wl_off, wl2
        # unit ladder from the binary pair
        i_on = self._currents(np.asarray([1]), np.asarray([1]))[0]
        i_floor = self._currents(np.asarray([1]), np.asarray([0]))[0]
        max_count = max_digit * group_rows
        levels = i_floor * group_rows + np.arange(max_count + 1) * (i_on - i_floor)
        bits = cfg.adc_bits
        if bits is None:
            bits = max(1, int(np.ceil(np.log2(max_count + 1))))
        self.adc = adc_mod.design_references(levels, bits)

    def _currents(self, digits, input_bits, dvth=None):
        cfg = self.cfg
        n = len(digits)
        vth1 = np.empty(n)
        vth2 = np.empty(n)
        vth3 = np.empty(n)
        for i, d in enumerate(digits):
            vth1[i], vth2[i], vth3[i] = self.vths[int(d)]
        if dvth is not None:
            vth1 = vth1 + dvth[:, 0]
            vth2 = vth2 + dvth[:, 1]
        wl1 = np.where(np.asarray(input_bits) > 0, self.wl_on, self.wl_off)
        _, isl = node_and_output(vth1, vth2, vth3, wl1, self.wl2,
                                 self.cfg.bias_cfg, cfg.temperature_k,
                                 self.design)
        return np.atleast_1d(isl)

    def group_sums(self, digits_g, bits, dvth_g=None):
        rows, outs = digits_g.shape
        codes = np.empty(outs, dtype=np.int64)
        for j in range(outs):
            dv = None if dvth_g is None else dvth_g[:, j]
            isl = self._currents(digits_g[:, j], bits, dv)
            codes[j] = adc_mod.flash_convert(float(np.sum(isl)), self.adc)
        return codes


def _draw_cell_noise(digits, sigma_table, rng):
    """Per-cell multiplicative factors (1 + eps), eps ~ N(0, sigma_d^2)
    keyed by the stored digit. Variation is static for the whole forward
    pass, like the device mismatch it stands in for."""
    sig = np.zeros(digits.shape, dtype=np.float64)
    for d, s in sigma_table.items():
        if s > 0.0:
            sig[digits == d] = s
    return 1.0 + rng.normal(0.0, 1.0, digits.shape) * sig


def _statistical_group_sums(digits_g, bits, noise_g):
    contrib = digits_g.astype(np.float64) * noise_g * bits[:, None]
    return contrib.sum(axis=0)


def layer_forward_hw(layer: MappedLayer, activations, cfg: InferenceConfig,
                     rng: np.random.Generator | None = None) -> np.ndarray:
    """Hardware-path forward pass of one layer for one activation vector.

    Returns pre-scale integer outputs (ideal mode is exactly the integer
    matrix-vector product). Row tiling splits the fan-in into groups of
    ``cfg.rows``; each input-bit pulse contributes per-group partial sums
    that are shift-added across pulse and digit significance, and the
    offset term 128 * sum(activations) is subtracted digitally.
    """
    a = np.atleast_1d(np.asarray(activations, dtype=np.int64))
    if a.shape != (layer.in_features,):
        raise MappingError(
            f"activation length {a.shape} does not match fan-in {layer.in_features}"
        )
    mode = cfg.mode
    if mode is FidelityMode.STATISTICAL and cfg.sigma_table and rng is None:
        raise DomainError("statistical mode with a sigma table needs an RNG")

    pulses = bit_serial_pulses(a, cfg.msb_first)
    p_sig = pulse_significances(cfg.msb_first)
    d_sig = layer.significances
    rows = cfg.rows
    groups = [slice(s, min(s + rows, layer.in_features))
              for s in range(0, layer.in_features, rows)]

    max_digit = (1 << layer.bits_per_cell) - 1
    evaluator = None
    noise = None
    dvth = None
    if mode is FidelityMode.ANALOG:
        evaluator = _AnalogColumnEvaluator(cfg, rows, max_digit)
        if cfg.sigma_vt > 0.0:
            if rng is None:
                raise DomainError("analog mode with sigma_vt needs an RNG")
            # static per-device threshold shifts for this forward pass:
            # one pair per cell, shape (in, out, digits, 2)
            dvth = rng.normal(0.0, cfg.sigma_vt, layer.digits.shape + (2,))
    elif mode is FidelityMode.STATISTICAL and cfg.sigma_table:
        noise = _draw_cell_noise(layer.digits, cfg.sigma_table, rng)

    if noise is not None:
        acc = np.zeros(layer.out_features, dtype=np.float64)
    else:
        acc = np.zeros(layer.out_features, dtype=np.int64)

    for p in range(8):
        bits = pulses[p]
        for g in groups:
            bits_g = bits[g]
            if not np.any(bits_g) and mode is not FidelityMode.ANALOG:
                continue
            for j in range(layer.n_digits):
                digits_g = layer.digits[g, :, j]
                if mode is FidelityMode.IDEAL:
                    sums = _ideal_group_sums(digits_g, bits_g)
                elif mode is FidelityMode.ANALOG:
                    dv_g = None if dvth is None else dvth[g, :, j]
                    sums = evaluator.group_sums(digits_g, bits_g, dv_g)
                elif noise is not None:
                    sums = _statistical_group_sums(
                        digits_g, bits_g, noise[g, :, j]
                    )
                else:
                    sums = _ideal_group_sums(digits_g, bits_g)
                acc = acc + sums * (p_sig[p] * d_sig[j])

    offset = WEIGHT_OFFSET * int(np.sum(a))
    out = acc - offset
    if noise is not None:
        out = _round_half_away(out).astype(np.int64)
    return out


def weight_state_frequencies(net: MappedNetwork) -> dict:
    """Normalized histogram of stored cell digits across the network."""
    counts = {}
    for layer in net.layers:
        vals, cnt = np.unique(layer.digits, return_counts=True)
        for v, c in zip(vals, cnt):
            counts[int(v)] = counts.get(int(v), 0) + int(c)
    total = sum(counts.values())
    return {d: c / total for d, c in sorted(counts.items())}


def combined_variance(per_state_sigma: dict, freqs: dict,
                      exclude=frozenset({0})) -> float:
    """Frequency-weighted average of the per-state output sigmas over the
    included states (the lowest-conduction state is excluded by default)."""
    num = 0.0
    den = 0.0
    for d, f in freqs.items():
        if d in exclude:
            continue
        if d not in per_state_sigma:
            raise DomainError(f"no sigma for state {d}")
        num += f * per_state_sigma[d]
        den += f
    if den <= 0.0:
        raise DomainError("no states left after exclusion")
    return num / den


# ---------------------------------------------------------------------------
# network-level inference
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantizedNetwork:
    """Float layers quantized and mapped for the hardware path."""

    mapped: MappedNetwork
    weight_tensors: tuple
    float_weights: tuple
    biases: tuple


def build_network(float_weights, bits_per_cell: int, biases=None) -> QuantizedNetwork:
    if biases is None:
        biases = [None] * len(float_weights)
    qts = []
    layers = []
    for w, b in zip(float_weights, biases):
        qt = quantize_tensor(np.asarray(w, dtype=np.float64), bits=8, symmetric=True)
        qts.append(qt)
        layers.append(map_weights(qt, bits_per_cell, bias=b))
    return QuantizedNetwork(
        mapped=MappedNetwork(layers=tuple(layers), bits_per_cell=bits_per_cell),
        weight_tensors=tuple(qts),
        float_weights=tuple(np.asarray(w, dtype=np.float64) for w in float_weights),
        biases=tuple(biases),
    )


def _forward_sample(net: QuantizedNetwork, x: np.ndarray, cfg: InferenceConfig,
                    rng: np.random.Generator | None) -> int:
    act = np.asarray(x, dtype=np.float64)
    for layer in net.mapped.layers:
        act = np.maximum(act, 0.0)
        qa = quantize_tensor(act, bits=8, symmetric=False)
        ints = layer_forward_hw(layer, qa.values, cfg, rng)
        act = ints.astype(np.float64) * (layer.scale * qa.scale)
        if layer.bias is not None:
            act = act + np.asarray(layer.bias, dtype=np.float64)
    return int(np.argmax(act))


def software_forward(net: QuantizedNetwork, x: np.ndarray) -> int:
    """Software oracle: the same quantized network evaluated with plain
    integer matrix-vector products."""
    act = np.asarray(x, dtype=np.float64)
    for layer, qt in zip(net.mapped.layers, net.weight_tensors):
        act = np.maximum(act, 0.0)
        qa = quantize_tensor(act, bits=8, symmetric=False)
        ints = qa.values @ qt.values
        act = ints.astype(np.float64) * (layer.scale * qa.scale)
        if layer.bias is not None:
            act = act + np.asarray(layer.bias, dtype=np.float64)
    return int(np.argmax(act))


@dataclass(frozen=True)
class AccuracyReport:
    mode: str
    sigma: float | dict
    temperature_k: float
    repeats: int
    seed: int
    accuracy_mean: float
    accuracy_std: float
    per_repeat: tuple

    def to_json_dict(self) -> dict:
        sig = self.sigma if isinstance(self.sigma, (int, float)) else dict(self.sigma)
        return {
            "mode": self.mode,
            "sigma": sig,
            "temperature_k": self.temperature_k,
            "repeats": self.repeats,
            "seed": self.seed,
            "accuracy_mean": self.accuracy_mean,
            "accuracy_std": self.accuracy_std,
            "per_repeat": list(self.per_repeat),
        }


def infer(net: QuantizedNetwork, inputs, labels, cfg: InferenceConfig,
          repeats: int = 1, seed: int = 0) -> AccuracyReport:
    """Classification accuracy over the dataset, mean and std over seeded
    repeats. Per-(repeat, sample) RNG streams keep any evaluation order
    bit-reproducible."""
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if inputs.shape[0] == 0:
        raise DomainError("empty dataset")
    if repeats < 1:
        raise DomainError("repeats must be >= 1")
    n = inputs.shape[0]
    needs_rng = (
        (cfg.mode is FidelityMode.STATISTICAL and bool(cfg.sigma_table))
        or (cfg.mode is FidelityMode.ANALOG and cfg.sigma_vt > 0.0)
    )
    root = np.random.SeedSequence(seed)
    streams = root.spawn(repeats * n) if needs_rng else None
    accs = []
    for r in range(repeats):
        hits = 0
        for i in range(n):
            rng = (np.random.default_rng(streams[r * n + i])
                   if streams is not None else None)
            pred = _forward_sample(net, inputs[i], cfg, rng)
            hits += pred == labels[i]
        accs.append(hits / n)
        if not needs_rng:
            # noise-free runs are identical; evaluate once
            accs = accs * repeats
            break
    accs = np.asarray(accs[:repeats], dtype=np.float64)
    sigma = cfg.sigma_table if cfg.sigma_table else cfg.sigma_vt
    return AccuracyReport(
        mode=cfg.mode.value,
        sigma=sigma,
        temperature_k=cfg.temperature_k,
        repeats=repeats,
        seed=seed,
        accuracy_mean=float(accs.mean()),
        accuracy_std=float(accs.std()),
        per_repeat=tuple(float(a) for a in accs),
    )
