"""Synthetic corpus generation with known ground truth.

Generated series are the closed-form model curves on a uniform grid
with optional multiplicative noise, so every record carries the exact
generating kind and parameters.  They are the verification oracle for
the fitting, classification and prediction machinery.

Randomness comes from a small portable generator (SplitMix64 for the
integer stream, Box-Muller for normals) rather than a platform RNG, so
a corpus is bit-reproducible from its seed anywhere; the constants are
documented on the SplitMix64 class.  Records draw independent sub-seeds
derived from (corpus seed, record index), making per-record generation
order-independent.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .models import KIND_ORDER, ModelKind, ParamSet, evaluate
from .series import SeriesRecord

# Documented parameter ranges for corpus draws (normalized units).
PARAM_RANGES = {
    "s0": (0.01, 0.2),
    "m": (0.7, 1.0),
    "lam": (2.0, 20.0),
    "k": (0.05, 0.3),
}

LABELS_HEADER = ("id", "kind", "S0", "M", "lambda", "k", "noise_sigma")

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """64-bit counter-based generator (Steele, Lea & Flood 2014).

    State advances by the golden-gamma constant 0x9E3779B97F4A7C15; each
    output is mixed with xor-shifts and the multipliers
    0xBF58476D1CE4E5B9 and 0x94D049BB133111EB.  Uniform doubles take the
    top 53 bits; normals use the Box-Muller transform.
    """

    GAMMA = 0x9E3779B97F4A7C15
    MIX1 = 0xBF58476D1CE4E5B9
    MIX2 = 0x94D049BB133111EB

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + self.GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * self.MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * self.MIX2) & _MASK64
        return z ^ (z >> 31)

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        # top 53 bits -> double in [0, 1)
        unit = (self.next_u64() >> 11) * (1.0 / (1 << 53))
        return low + (high - low) * unit

    def normal(self, mean: float = 0.0, sigma: float = 1.0) -> float:
        # Box-Muller; first uniform shifted off zero so log is defined.
        u1 = ((self.next_u64() >> 11) + 1) * (1.0 / ((1 << 53) + 1))
        u2 = (self.next_u64() >> 11) * (1.0 / (1 << 53))
        return mean + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def subseed(seed: int, index: int) -> int:
    """Deterministic per-record seed: one SplitMix64 mix of
    seed XOR (index+1)*GAMMA, a pure function of (seed, index)."""
    z = (seed ^ (((index + 1) * SplitMix64.GAMMA) & _MASK64)) & _MASK64
    z = ((z ^ (z >> 30)) * SplitMix64.MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * SplitMix64.MIX2) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic series."""

    kind: ModelKind
    params: ParamSet
    n: int = 200
    noise_sigma: float = 0.0
    seed: int = 0
    denorm_scale: Optional[tuple] = None  # (t_n days, y_n views)

    def validate(self) -> None:
        if self.n < 6:
            raise ValueError(f"need n >= 6, got {self.n}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


@dataclass(frozen=True)
class SynthLabel:
    """Ground truth attached to a generated record."""

    id: str
    kind: ModelKind
    params: ParamSet
    noise_sigma: float


def generate(spec: SynthSpec, record_id: str = "synth") -> tuple:
    """Generate one series; returns (SeriesRecord, SynthLabel).

    The closed form is evaluated on the uniform grid i/n, i = 1..n,
    multiplicative noise (1 + eps) is applied per point, and cumulative
    monotonicity is restored with a running max.
    """
    spec.validate()
    rng = SplitMix64(spec.seed)
    grid = [(i + 1) / spec.n for i in range(spec.n)]
    values = [evaluate(spec.kind, spec.params, t) for t in grid]
    if spec.noise_sigma > 0:
        values = [v * (1.0 + rng.normal(0.0, spec.noise_sigma)) for v in values]
    running = 0.0
    monotone = []
    for v in values:
        running = max(running, v)
        monotone.append(running)

    t_scale, y_scale = spec.denorm_scale if spec.denorm_scale else (1.0, 1.0)
    observations = [(t * t_scale, v * y_scale) for t, v in zip(grid, monotone)]
    record = SeriesRecord(id=record_id, observations=observations)
    label = SynthLabel(id=record_id, kind=spec.kind, params=spec.params,
                       noise_sigma=spec.noise_sigma)
    return record, label


def draw_params(kind: ModelKind, rng: SplitMix64) -> ParamSet:
    """Draw generating parameters from the documented ranges."""
    s0 = rng.uniform(*PARAM_RANGES["s0"])
    m = rng.uniform(*PARAM_RANGES["m"])
    lam = rng.uniform(*PARAM_RANGES["lam"])
    k = rng.uniform(*PARAM_RANGES["k"]) if kind.value.startswith("mod") else 0.0
    if kind is ModelKind.LINEAR:
        # A line from s0 to ~1 over the unit window keeps draws in family.
        return ParamSet(s0=s0, lam=rng.uniform(0.5, 1.5))
    return ParamSet(s0=s0, m=m, lam=lam, k=k)


def generate_corpus(
    mix: list,
    seed: int = 0,
    n: int = 200,
    noise_sigma: float = 0.0,
    denorm_scale: Optional[tuple] = None,
) -> tuple:
    """Generate a labeled corpus from a mix of (kind, count) pairs.

    Each record gets an independent sub-seed derived from (seed, index),
    so the corpus is identical for a given seed regardless of generation
    order.  Returns (records, labels).
    """
    records, labels = [], []
    index = 0
    for kind, count in mix:
        if count < 1:
            raise ValueError(f"count must be >= 1, got {count}")
        for _ in range(count):
            record_seed = subseed(seed, index)
            rng = SplitMix64(record_seed)
            params = draw_params(kind, rng)
            spec = SynthSpec(
                kind=kind, params=params, n=n, noise_sigma=noise_sigma,
                seed=subseed(record_seed, 1), denorm_scale=denorm_scale,
            )
            record_id = f"synth-{index:05d}-{kind.value}"
            record, label = generate(spec, record_id=record_id)
            records.append(record)
            labels.append(label)
            index += 1
    return records, labels


def full_mix(per_kind: int) -> list:
    """All seven kinds, ``per_kind`` records each."""
    return [(kind, per_kind) for kind in KIND_ORDER]


# Base/modified siblings: a base-kind series is often fitted equally well
# by its immigration variant with k ~ 0 (and vice versa for small k), so
# accuracy scoring accepts either member of the family.
_FAMILY = {
    ModelKind.LINEAR: "linear",
    ModelKind.NEGEXP: "negexp",
    ModelKind.MODNEGEXP: "negexp",
    ModelKind.LOGISTIC: "logistic",
    ModelKind.MODLOGISTIC: "logistic",
    ModelKind.GOMPERTZ: "gompertz",
    ModelKind.MODGOMPERTZ: "gompertz",
}


def match_label(selected: str, label_kind: ModelKind) -> bool:
    """True when a selected kind matches the generating kind, counting
    base/modified pairs of the same family as a match."""
    try:
        selected_kind = ModelKind(selected)
    except ValueError:
        return False  # UNCLASSIFIED never matches
    return _FAMILY[selected_kind] == _FAMILY[label_kind]


def write_labels(labels: list, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(LABELS_HEADER)
        for label in labels:
            p = label.params
            writer.writerow([
                label.id, label.kind.value,
                repr(p.s0), repr(p.m), repr(p.lam), repr(p.k),
                repr(label.noise_sigma),
            ])


def read_labels(path) -> dict:
    """Labels CSV -> {id: SynthLabel}."""
    out = {}
    with open(Path(path), newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out[row["id"]] = SynthLabel(
                id=row["id"],
                kind=ModelKind(row["kind"]),
                params=ParamSet(s0=float(row["S0"]), m=float(row["M"]),
                                lam=float(row["lambda"]), k=float(row["k"])),
                noise_sigma=float(row["noise_sigma"]),
            )
    return out
