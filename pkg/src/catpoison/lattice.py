"""Single-arrival dynamics of the n-gas catalytic surface model on a 1-D lattice.

States are small integers: 0 is a vacant site, ``1..n`` are gas types.  In the
infinite-gas variant every non-1 molecule carries its own integer identifier
(>= 2), so "differs from" reduces to plain inequality and the same reaction
rule serves both variants.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple

__all__ = [
    "INFINITE",
    "LEFT_FIRST",
    "RIGHT_FIRST",
    "Boundary",
    "Kind",
    "ModelSpec",
    "Configuration",
    "ArrivalOutcome",
    "WeightReport",
    "apply_arrival",
    "is_absorbing",
    "weight",
    "canonical_window",
]

INFINITE = math.inf

# Neighbor orderings, highest priority first.
LEFT_FIRST: Tuple[int, int] = (-1, 1)
RIGHT_FIRST: Tuple[int, int] = (1, -1)

_RATE_TOL = 1e-12


class Boundary(str, enum.Enum):
    TORUS = "torus"
    BLOCKED = "blocked"


class Kind(enum.IntEnum):
    NOOP = 0
    STICK = 1
    REACT = 2


@dataclass(frozen=True)
class ModelSpec:
    """Gas count and arrival rates.

    ``n`` is an integer >= 2 or :data:`INFINITE`.  For finite ``n``, ``rates``
    holds ``p_1..p_n``; in the infinite variant it holds ``(p_1, 1 - p_1)``,
    the second entry being the total rate of fresh non-1 molecules.
    """

    n: float
    rates: Tuple[float, ...]
    dimension: int = 1

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        object.__setattr__(self, "rates", rates)
        if self.dimension != 1:
            raise ValueError("only dimension 1 is supported")
        if self.infinite:
            if len(rates) != 2:
                raise ValueError("infinite variant takes (p1, 1 - p1)")
        else:
            if int(self.n) != self.n or self.n < 2:
                raise ValueError(f"gas count must be an integer >= 2, got {self.n}")
            object.__setattr__(self, "n", int(self.n))
            if len(rates) != self.n:
                raise ValueError(f"expected {self.n} rates, got {len(rates)}")
        if any(r < 0.0 or r > 1.0 for r in rates):
            raise ValueError(f"rates must lie in [0, 1]: {rates}")
        if abs(sum(rates) - 1.0) > _RATE_TOL:
            raise ValueError(f"rates must sum to 1, got {sum(rates)!r}")

    @classmethod
    def equal_others(cls, n: float, p1: float) -> "ModelSpec":
        """Gas 1 at rate ``p1``, every other gas at ``(1 - p1) / (n - 1)``."""
        if n == INFINITE:
            return cls(INFINITE, (p1, 1.0 - p1))
        n = int(n)
        other = (1.0 - p1) / (n - 1)
        rates = (p1,) + (other,) * (n - 1)
        # absorb rounding so the sum check holds exactly
        rates = rates[:-1] + (1.0 - math.fsum(rates[:-1]),)
        return cls(n, rates)

    @property
    def infinite(self) -> bool:
        return self.n == INFINITE

    @property
    def p1(self) -> float:
        return self.rates[0]

    def to_dict(self) -> dict:
        return {
            "n": "inf" if self.infinite else self.n,
            "rates": list(self.rates),
            "dimension": self.dimension,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSpec":
        n = INFINITE if d["n"] in ("inf", INFINITE) else int(d["n"])
        return cls(n, tuple(d["rates"]), d.get("dimension", 1))


@dataclass(frozen=True)
class Configuration:
    sites: Tuple[int, ...]
    boundary: Boundary = Boundary.BLOCKED

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(int(s) for s in self.sites))
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if not self.sites:
            raise ValueError("configuration must have at least one site")
        if any(s < 0 for s in self.sites):
            raise ValueError("states must be nonnegative")
        bad = self.violations()
        if bad:
            raise ValueError(f"adjacent distinct gases at sites {bad}: {self}")

    @classmethod
    def parse(cls, text: str, boundary: Boundary | str = Boundary.BLOCKED) -> "Configuration":
        text = text.strip()
        if not text.isdigit():
            raise ValueError(f"configuration text must be digits 0-9: {text!r}")
        return cls(tuple(int(c) for c in text), Boundary(boundary))

    @classmethod
    def uniform(cls, size: int, state: int = 0, boundary: Boundary | str = Boundary.BLOCKED):
        return cls((state,) * size, Boundary(boundary))

    def __str__(self) -> str:
        if any(s > 9 for s in self.sites):
            raise ValueError("text form only covers states 0-9")
        return "".join(map(str, self.sites))

    def __len__(self) -> int:
        return len(self.sites)

    def neighbors(self, i: int) -> Tuple[Optional[int], Optional[int]]:
        """Indices of the left and right neighbors (None past a blocked end)."""
        size = len(self.sites)
        if self.boundary is Boundary.TORUS:
            if size == 1:
                return None, None
            return (i - 1) % size, (i + 1) % size
        return (i - 1 if i > 0 else None), (i + 1 if i < size - 1 else None)

    def violations(self) -> list[int]:
        s = self.sites
        size = len(s)
        pairs = range(size if self.boundary is Boundary.TORUS and size > 2 else size - 1)
        return [i for i in pairs if _clash(s[i], s[(i + 1) % size])]


def _clash(a: int, b: int) -> bool:
    return a != 0 and b != 0 and a != b


@dataclass(frozen=True)
class ArrivalOutcome:
    kind: Kind
    config: Configuration
    victim: Optional[int] = None


def resolve_arrival(sites: Sequence[int], site: int, gas: int, order: Sequence[int],
                    left: Optional[int], right: Optional[int]) -> Tuple[Kind, Optional[int]]:
    """Outcome of ``gas`` landing on ``site`` given neighbor indices.

    Shared by :func:`apply_arrival` and the pure-Python coupled simulator.
    """
    if sites[site] != 0:
        return Kind.NOOP, None
    by_offset = {-1: left, 1: right}
    for off in order:
        j = by_offset[off]
        if j is not None and sites[j] != 0 and sites[j] != gas:
            return Kind.REACT, j
    return Kind.STICK, None


def apply_arrival(config: Configuration, site: int, gas: int,
                  neighbor_order: Sequence[int] = LEFT_FIRST) -> ArrivalOutcome:
    """Apply one arrival of ``gas`` at ``site``.

    The arrival sticks unless some neighbor holds a different gas, in which
    case it reacts with the differing neighbor ranked first by
    ``neighbor_order`` and both sites end vacant.  Arrivals on occupied sites
    are no-ops.
    """
    if not 0 <= site < len(config.sites):
        raise IndexError(f"site {site} outside lattice of size {len(config.sites)}")
    if gas <= 0:
        raise ValueError("arriving gas must be nonzero")
    if sorted(neighbor_order) != [-1, 1]:
        raise ValueError(f"neighbor order must be a permutation of (-1, 1): {neighbor_order}")
    left, right = config.neighbors(site)
    kind, victim = resolve_arrival(config.sites, site, gas, neighbor_order, left, right)
    if kind is Kind.NOOP:
        return ArrivalOutcome(kind, config)
    new = list(config.sites)
    if kind is Kind.STICK:
        new[site] = gas
    else:
        new[victim] = 0
    return ArrivalOutcome(kind, Configuration(tuple(new), config.boundary), victim)


def is_absorbing(config: Configuration) -> Optional[int]:
    """The gas ``i >= 1`` if every site holds ``i``, else None."""
    first = config.sites[0]
    if first != 0 and all(s == first for s in config.sites):
        return first
    return None


def canonical_window(symbols: Sequence[int]) -> Tuple[int, ...]:
    """Relabel non-{0,1} symbols 2, 3, ... by order of first appearance."""
    labels: dict[int, int] = {}
    out = []
    for s in symbols:
        if s > 1:
            s = labels.setdefault(s, 2 + len(labels))
        out.append(s)
    return tuple(out)


@dataclass(frozen=True)
class WeightReport:
    block_len: float
    window: Optional[Tuple[int, ...]]
    weight: float


def weight(config: Configuration, score_table) -> WeightReport:
    """Block length of the 1-run at site 0 plus the score of the window
    that follows the first vacant site after it.

    ``score_table`` needs ``L`` and a ``score(block)`` method; window sites
    past the lattice end read as vacant.
    """
    if config.boundary is not Boundary.BLOCKED:
        raise ValueError("weight is defined on a blocked (half-line) lattice")
    sites = config.sites
    if sites[0] not in (0, 1):
        raise ValueError("site 0 must hold 0 or 1")
    size = len(sites)
    b = 0
    while b < size and sites[b] == 1:
        b += 1
    if b == size:
        return WeightReport(math.inf, None, math.inf)
    # sites[b] is vacant: a non-1 gas cannot sit next to a 1
    L = score_table.L
    raw = [sites[j] if j < size else 0 for j in range(b + 1, b + 1 + L)]
    window = canonical_window(raw)
    return WeightReport(b, window, b + score_table.score(window))
