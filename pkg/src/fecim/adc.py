"""Flash ADC built from current-sense-amplifier comparators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .devices import DomainError


class DegenerateRangeError(DomainError):
    """Reference design needs at least two distinct levels."""


@dataclass(frozen=True)
class AdcConfig:
    """Flash converter: 2**bits - 1 strictly increasing current references.

    A conversion counts the references strictly below the input current;
    an input exactly equal to a reference does not pass that comparator.
    """

    bits: int
    references: tuple
    comparator_offset_sigma: float = 0.0

    def __post_init__(self):
        refs = tuple(float(r) for r in self.references)
        object.__setattr__(self, "references", refs)
        expected = (1 << self.bits) - 1
        if len(refs) != expected:
            raise DomainError(
                f"{self.bits}-bit flash needs {expected} references, got {len(refs)}"
            )
        if np.any(np.diff(refs) <= 0.0):
            raise DomainError("references must be strictly increasing")

    @property
    def comparator_count(self) -> int:
        return len(self.references)

    @property
    def full_scale_code(self) -> int:
        return (1 << self.bits) - 1


def design_references(levels, bits: int) -> AdcConfig:
    """Place references at midpoints between consecutive nominal levels.

    With more midpoints than comparators the lowest ones are kept, so the
    top counts saturate at full-scale code. With fewer, the reference
    ladder is extended above the level range at the mean gap so every real
    boundary still has its own comparator.
    """
    lv = np.asarray(sorted(float(x) for x in levels), dtype=np.float64)
    if lv.size < 2 or lv[-1] <= lv[0]:
        raise DegenerateRangeError(
            "need at least two distinct levels to place references"
        )
    lv = np.unique(lv)
    mids = 0.5 * (lv[:-1] + lv[1:])
    needed = (1 << bits) - 1
    if mids.size >= needed:
        refs = mids[:needed]
    else:
        gap = float(np.mean(np.diff(lv)))
        pad = mids[-1] + gap * np.arange(1, needed - mids.size + 1)
        refs = np.concatenate([mids, pad])
    return AdcConfig(bits=bits, references=tuple(refs))


def flash_convert(i_in: float, cfg: AdcConfig, rng: np.random.Generator | None = None) -> int:
    """Thermometer-to-binary conversion: number of references strictly
    below the input current. Comparator offsets, when enabled, are drawn
    per comparison from the supplied generator."""
    refs = np.asarray(cfg.references, dtype=np.float64)
    if cfg.comparator_offset_sigma > 0.0:
        if rng is None:
            raise DomainError("comparator offsets need an RNG")
        refs = refs + rng.normal(0.0, cfg.comparator_offset_sigma, refs.size)
    return int(np.count_nonzero(refs < i_in))


def convert_many(currents, cfg: AdcConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Vectorized zero-offset or per-sample-offset conversion."""
    cur = np.atleast_1d(np.asarray(currents, dtype=np.float64))
    refs = np.asarray(cfg.references, dtype=np.float64)
    if cfg.comparator_offset_sigma > 0.0:
        if rng is None:
            raise DomainError("comparator offsets need an RNG")
        noisy = refs[None, :] + rng.normal(
            0.0, cfg.comparator_offset_sigma, (cur.size, refs.size)
        )
        return np.count_nonzero(noisy < cur[:, None], axis=1)
    return np.searchsorted(refs, cur, side="left").astype(np.int64)


def references_to_csv(cfg: AdcConfig) -> str:
    lines = ["index,reference_a"]
    for i, r in enumerate(cfg.references):
        lines.append(f"{i},{r:.9e}")
    return "\n".join(lines) + "\n"


def references_from_csv(text: str, bits: int) -> AdcConfig:
    refs = []
    for line in text.strip().splitlines()[1:]:
        _, val = line.split(",")
        refs.append(float(val))
    return AdcConfig(bits=bits, references=tuple(refs))
