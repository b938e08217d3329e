"""Two systems driven by the same arrivals (site, time and tie-break order
shared), with arrival types drawn as pairs from a joint law.

Under such a coupling the 1's of the system with the smaller gas-1 rate need
not stay inside the 1's of the other system; :func:`replay` of the bundled
script shows a six-step realization where they escape.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .lattice import (
    LEFT_FIRST,
    RIGHT_FIRST,
    Boundary,
    Configuration,
    Kind,
    ModelSpec,
    apply_arrival,
    is_absorbing,
    resolve_arrival,
)
from .rng import derive_seed, joint_stream

__all__ = [
    "JointArrivalLaw",
    "CoupledState",
    "CoupledEvent",
    "coupled_arrival",
    "replay",
    "load_script",
    "golden_script",
    "monotonicity_check",
    "violation_frequency",
    "coupled_absorption",
    "COUNTEREXAMPLE_LAW",
]

Pair = Tuple[int, int]


@dataclass(frozen=True)
class JointArrivalLaw:
    """Probabilities of arrival type pairs ``(type_a, type_b)``."""

    probs: Tuple[Tuple[Pair, float], ...]

    def __init__(self, probs: Mapping[Pair, float]):
        items = tuple(sorted((tuple(int(x) for x in k), float(v)) for k, v in probs.items() if v > 0))
        for (a, b), p in items:
            if a < 1 or b < 1:
                raise ValueError(f"pair ({a}, {b}) has a non-gas component")
            if p > 1:
                raise ValueError(f"probability {p} exceeds 1")
        if any(v < 0 for v in probs.values()):
            raise ValueError("probabilities must be nonnegative")
        total = math.fsum(p for _, p in items)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"joint law sums to {total}, not 1")
        object.__setattr__(self, "probs", items)

    def as_dict(self) -> Dict[Pair, float]:
        return dict(self.probs)

    @property
    def support(self) -> List[Pair]:
        return [k for k, _ in self.probs]

    def marginal(self, coord: int) -> Tuple[float, ...]:
        """Rate vector of system ``coord`` (0 for A, 1 for B)."""
        n = max(max(a, b) for a, b in self.support)
        out = [0.0] * n
        for pair, p in self.probs:
            out[pair[coord] - 1] += p
        return tuple(out)

    def spec(self, coord: int) -> ModelSpec:
        m = self.marginal(coord)
        return ModelSpec(len(m), m)


COUNTEREXAMPLE_LAW = JointArrivalLaw({
    (2, 2): 1 / 4, (3, 3): 1 / 4, (1, 1): 1 / 3, (2, 1): 1 / 12, (3, 1): 1 / 12,
})


@dataclass(frozen=True)
class CoupledState:
    a: Configuration
    b: Configuration

    def __post_init__(self):
        if len(self.a) != len(self.b):
            raise ValueError("coupled systems must have equal size")
        if self.a.boundary is not self.b.boundary:
            raise ValueError("coupled systems must share a boundary")

    @classmethod
    def parse(cls, text: str, boundary=Boundary.BLOCKED) -> "CoupledState":
        left, right = text.split(",")
        return cls(Configuration.parse(left, boundary), Configuration.parse(right, boundary))

    @classmethod
    def vacant(cls, size: int, boundary=Boundary.BLOCKED) -> "CoupledState":
        c = Configuration.uniform(size, 0, boundary)
        return cls(c, c)

    def __str__(self):
        return f"{self.a},{self.b}"


@dataclass(frozen=True)
class CoupledEvent:
    site: int
    pair: Pair
    order: Tuple[int, int] = LEFT_FIRST


def coupled_arrival(state: CoupledState, site: int, pair: Pair,
                    ordering: Sequence[int] = LEFT_FIRST,
                    law: Optional[JointArrivalLaw] = None) -> CoupledState:
    """Drop ``pair[0]`` on system A and ``pair[1]`` on system B at ``site``,
    both resolving reactions with the same ``ordering``."""
    if law is not None and tuple(pair) not in law.support:
        raise ValueError(f"pair {tuple(pair)} is outside the joint law's support")
    a = apply_arrival(state.a, site, pair[0], ordering).config
    b = apply_arrival(state.b, site, pair[1], ordering).config
    return CoupledState(a, b)


def replay(script: Iterable, initial: Optional[CoupledState] = None,
           size: int = 10, boundary=Boundary.BLOCKED) -> List[CoupledState]:
    """Fold :func:`coupled_arrival` over ``script``; returns every state,
    the initial one first."""
    state = initial if initial is not None else CoupledState.vacant(size, boundary)
    out = [state]
    for ev in script:
        if not isinstance(ev, CoupledEvent):
            ev = CoupledEvent(*ev)
        state = coupled_arrival(state, ev.site, ev.pair, ev.order)
        out.append(state)
    return out


_ORDERS = {"L": LEFT_FIRST, "R": RIGHT_FIRST}


def load_script(path: Union[str, Path, None] = None, text: Optional[str] = None) -> List[CoupledEvent]:
    """Parse ``site pair_a pair_b order`` lines; ``#`` starts a comment."""
    if text is None:
        text = Path(path).read_text()
    events = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4 or parts[3].upper() not in _ORDERS:
            raise ValueError(f"line {lineno}: expected 'site pair_a pair_b L|R', got {raw!r}")
        site, a, b = (int(x) for x in parts[:3])
        events.append(CoupledEvent(site, (a, b), _ORDERS[parts[3].upper()]))
    return events


def golden_script(final_order: str = "L") -> List[CoupledEvent]:
    """The bundled six-step realization; ``final_order`` picks the last tie-break."""
    text = resources.files("catpoison").joinpath("data/coupling_counterexample.txt").read_text()
    events = load_script(text=text)
    last = events[-1]
    events[-1] = CoupledEvent(last.site, last.pair, _ORDERS[final_order.upper()])
    return events


def monotonicity_check(state: CoupledState) -> List[int]:
    """Sites holding a 1 in system A but not in system B."""
    return [i for i, (x, y) in enumerate(zip(state.a.sites, state.b.sites)) if x == 1 and y != 1]


def _coupled_run(law: JointArrivalLaw, size: int, boundary: Boundary, seed: int,
                 max_time: float, max_events: int, until_absorbed: bool):
    """Event loop over coupled systems; returns (state, violated, time, events)."""
    pairs_law = law.as_dict()
    streams = [joint_stream(seed, i, pairs_law) for i in range(size)]
    heap = [(s.peek_time(), i) for i, s in enumerate(streams)]
    heapq.heapify(heap)
    a = [0] * size
    b = [0] * size
    cfg = Configuration.uniform(size, 0, boundary)
    violated = False
    events = 0
    t = 0.0
    while events < max_events:
        if until_absorbed and _absorbed(a) and _absorbed(b):
            break
        t_next, i = heap[0]
        if t_next > max_time:
            t = max_time
            break
        t, pair, order = streams[i].next_arrival()
        heapq.heapreplace(heap, (streams[i].peek_time(), i))
        left, right = cfg.neighbors(i)
        for sites, gas in ((a, pair[0]), (b, pair[1])):
            _arrive(sites, i, gas, order, left, right)
        events += 1
        if not violated:
            violated = _any_violation(a, b, i, left, right)
    state = CoupledState(Configuration(tuple(a), boundary), Configuration(tuple(b), boundary))
    return state, violated, t, events


def _absorbed(sites: List[int]) -> bool:
    return sites[0] != 0 and all(s == sites[0] for s in sites)


def _arrive(sites, i, gas, order, left, right):
    kind, victim = resolve_arrival(sites, i, gas, order, left, right)
    if kind is Kind.STICK:
        sites[i] = gas
    elif kind is Kind.REACT:
        sites[victim] = 0


def _any_violation(a, b, i, left, right) -> bool:
    # only the arrival site can gain a 1 in A; only it or a neighbor can lose a 1 in B
    return any(j is not None and a[j] == 1 and b[j] != 1 for j in (i, left, right))


def violation_frequency(law: JointArrivalLaw, size: int, horizon: float, runs: int,
                        seed: int, boundary=Boundary.BLOCKED) -> float:
    """Fraction of coupled runs from all-vacant that ever show a site with a
    1 in system A and no 1 in system B before ``horizon``."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    boundary = Boundary(boundary)
    hits = 0
    for r in range(runs):
        _, violated, _, _ = _coupled_run(law, size, boundary, derive_seed(seed, r),
                                         horizon, np.iinfo(np.int64).max, False)
        hits += violated
    return hits / runs


def coupled_absorption(law: JointArrivalLaw, size: int, runs: int, seed: int,
                       boundary=Boundary.BLOCKED, max_events: Optional[int] = None):
    """Absorbed gas of each coordinate for ``runs`` coupled runs to absorption.

    Returns an integer array of shape ``(runs, 2)``; 0 marks a run that hit
    the event budget first.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    boundary = Boundary(boundary)
    budget = max_events if max_events is not None else 10_000 * size
    out = np.zeros((runs, 2), dtype=np.int64)
    for r in range(runs):
        state, _, _, _ = _coupled_run(law, size, boundary, derive_seed(seed, r),
                                      math.inf, budget, True)
        out[r] = (is_absorbing(state.a) or 0, is_absorbing(state.b) or 0)
    return out
