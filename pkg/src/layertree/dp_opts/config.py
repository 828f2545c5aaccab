"""Which speedups a solve uses."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class OptConfig:
    pareto: bool = True
    prune: bool = True
    balance: bool = True
    counterpart: bool = True
    greedy: bool = True
    estimate: bool = True

    def __post_init__(self):
        if self.estimate and not self.greedy:
            raise ValueError("the greedy estimate requires greedy completion")

    @classmethod
    def all(cls) -> "OptConfig":
        return cls()

    @classmethod
    def none(cls) -> "OptConfig":
        return cls(False, False, False, False, False, False)

    @classmethod
    def from_tag(cls, tag: str) -> "OptConfig":
        tag = tag.strip().lower()
        if tag == "all":
            return cls()
        if tag == "none":
            return cls.none()
        if tag.startswith("no-"):
            name = tag[3:]
            if name == "greedy":
                return cls(greedy=False, estimate=False)
            if name in ("pareto", "prune", "balance", "counterpart", "estimate"):
                return cls(**{name: False})
        raise ValueError(f"unknown optimization set {tag!r}; expected one of {', '.join(OPT_TAGS)}")

    @property
    def tag(self) -> str:
        for t in OPT_TAGS:
            if OptConfig.from_tag(t) == self:
                return t
        return ",".join(f"{k}={int(v)}" for k, v in self.__dict__.items())


OPT_TAGS = ("all", "none", "no-pareto", "no-prune", "no-balance", "no-counterpart",
            "no-greedy", "no-estimate")


def balanced_pairs(c: int) -> list[tuple[int, int]]:
    """Splits ``c = a0 + b0`` with ``ceil(c/3) <= a0 <= b0``."""
    return [(a0, c - a0) for a0 in range(-(-c // 3), c // 2 + 1)]


def all_pairs(c: int) -> list[tuple[int, int]]:
    return [(a0, c - a0) for a0 in range(1, c // 2 + 1)]
