"""Seeded random instances.

Every instance is a pure function of ``(seed, index)``: the stream for an
index is a PCG64 generator seeded from ``SeedSequence(seed, spawn_key=(index,))``,
and integers are drawn from its raw 64-bit output by rejection sampling, so
files are byte-identical on every platform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np

from .model import Instance, LayerSpec, write_instance

Number = Union[int, float, str, Fraction]
MAX_RETRIES = 1000


class GenerationError(RuntimeError):
    pass


def _frac(x: Number) -> Fraction:
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class GenParams:
    lam: int
    sources: tuple[int, int]
    factors: Optional[tuple[Fraction, Fraction]] = None  # None: derived from n0, see size_scan
    seed: int = 0
    count: int = 1
    spread: Fraction = Fraction(3, 10)
    # append a single root layer that can carry every source
    sink: bool = True

    def __post_init__(self):
        lo, hi = self.sources
        if self.lam < 1:
            raise ValueError("need at least one layer")
        if not 1 <= lo <= hi:
            raise ValueError(f"bad source range {lo}:{hi}")
        if self.factors is not None:
            f_lo, f_hi = (_frac(f) for f in self.factors)
            if not 1 <= f_lo <= f_hi:
                raise ValueError(f"bad factor range {f_lo}:{f_hi} (need 1 <= lo <= hi)")
            object.__setattr__(self, "factors", (f_lo, f_hi))
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def factors_for(self, n0: int) -> tuple[Fraction, Fraction]:
        if self.factors is not None:
            return self.factors
        return size_scan_factors(self.lam, n0, self.spread)


def size_scan_factors(lam: int, n0: int, spread: Fraction = Fraction(3, 10)) -> tuple[Fraction, Fraction]:
    """Factors centred on ``log_{2 lam}(n0)``, rounded to a rational with denominator <= 1000."""
    mid = Fraction(math.log(n0) / math.log(2 * lam)).limit_denominator(1000)
    return max(Fraction(1), mid - spread), max(Fraction(1), mid + spread)


class IntStream:
    """Exact uniform integers from a PCG64 raw stream."""

    def __init__(self, seed: int, index: int):
        self.bits = np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,)))

    def raw(self) -> int:
        return int(self.bits.random_raw())

    def integer(self, lo: int, hi: int) -> int:
        """Uniform in ``lo..hi`` inclusive."""
        span = hi - lo + 1
        if span <= 0:
            raise ValueError(f"empty range {lo}..{hi}")
        if span == 1:
            return lo
        limit = (1 << 64) - (1 << 64) % span
        while True:
            x = self.raw()
            if x < limit:
                return lo + x % span

    def uniform(self) -> float:
        return (self.raw() >> 11) * (1.0 / (1 << 53))


def _floor_div(n: int, f: Fraction) -> int:
    return (n * f.denominator) // f.numerator


def _draw(rng: IntStream, params: GenParams) -> Optional[Instance]:
    n0 = rng.integer(*params.sources)
    f_lo, f_hi = params.factors_for(n0)
    counts = [n0]
    for _ in range(params.lam):
        prev = counts[-1]
        c = rng.integer(_floor_div(prev, f_hi), _floor_div(prev, f_lo))
        if c == 0:
            return None
        counts.append(c)
    layers = []
    for c in counts[1:]:
        base = -(-n0 // c)
        hi = rng.integer(base, 2 * base)
        lo = min(rng.integer(0, (2 * hi) // 3), n0)
        layers.append(LayerSpec(c, lo, hi))
    if params.sink:
        layers.append(LayerSpec(1, 0, n0))
    return Instance(n0, tuple(layers))


def generate_one(params: GenParams, index: int) -> Instance:
    """Instance number ``index``; redraws the whole instance if a layer came out empty."""
    rng = IntStream(params.seed, index)
    for _ in range(MAX_RETRIES):
        inst = _draw(rng, params)
        if inst is not None:
            return inst
    raise GenerationError(f"instance {index}: every draw had an empty layer; factors too large for n0")


def generate(params: GenParams) -> Iterator[Instance]:
    for i in range(params.count):
        yield generate_one(params, i)


PRESETS = {
    # comparison against an exact solver: six layers, 1000 sources
    "comparison": dict(lam=6, sources=(1000, 1000), factors=(Fraction(17, 10), Fraction(23, 10))),
    # scaling study: factor window tied to the number of sources
    "size-scan": dict(lam=6, sources=(100, 10000), factors=None),
    # hardness study, small size class; pick one fixed factor
    "hardness": dict(lam=6, sources=(1000, 1500)),
}


def preset(name: str, seed: int = 0, count: int = 1, factor: Optional[Number] = None) -> GenParams:
    try:
        kw = dict(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    if name == "hardness":
        if factor is None:
            raise ValueError("the hardness preset needs a fixed factor")
        f = _frac(factor)
        kw["factors"] = (f, f)
    return GenParams(seed=seed, count=count, **kw)


def write_corpus(params: GenParams, out: Union[str, Path]) -> list[Path]:
    """Write ``NNNN.clt`` files plus ``manifest.json`` describing the parameters."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    entries = {}
    for i, inst in enumerate(generate(params)):
        p = out / f"{i:04d}.clt"
        p.write_bytes(write_instance(inst))
        paths.append(p)
        f_lo, f_hi = params.factors_for(inst.n0)
        entries[p.stem] = {"index": i, "factor_lo": str(f_lo), "factor_hi": str(f_hi)}
    manifest = {"seed": params.seed, "lambda": params.lam, "sink": params.sink,
                "sources": list(params.sources), "count": params.count,
                "instances": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return paths


# ------------------------------------------------------------ geometric instances


def cable_ladder(inst: Instance) -> list[dict]:
    """Cable types covering every capacity of the instance; cost per unit grows sublinearly."""
    loads = sorted({s.cap_hi for s in inst.layers} | {1, inst.n0})
    return [{"max_load": m, "cost_per_unit": round(m ** 0.75, 6)} for m in loads]


def geometric(inst: Instance, rng: IntStream, side: float = 1000.0) -> dict:
    """SoFaCLaP JSON object: positions uniform in a square, one per available vertex."""

    def points(k):
        return [[round(rng.uniform() * side, 3), round(rng.uniform() * side, 3)] for _ in range(k)]

    return {
        "version": 1,
        "sources": points(inst.n0),
        "layers": [{"cap_lo": s.cap_lo, "cap_hi": s.cap_hi, "positions": points(s.count)}
                   for s in inst.layers],
        "cables": cable_ladder(inst),
    }


def generate_geometric(params: GenParams, index: int) -> dict:
    inst = generate_one(params, index)
    rng = IntStream(params.seed, index)
    rng.bits = np.random.PCG64(np.random.SeedSequence(params.seed, spawn_key=(index, 1)))
    return geometric(inst, rng)


def write_geometric_corpus(params: GenParams, out: Union[str, Path]) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(params.count):
        p = out / f"{i:04d}.json"
        p.write_text(json.dumps(generate_geometric(params, i), separators=(",", ":")) + "\n")
        paths.append(p)
    return paths
