"""Per-site driving randomness.

Each site owns three independent sequences derived from one master seed:
an arrival clock (rate-1 Poisson process), a type sequence and a
neighbor-order sequence.  The k-th arrival at a site always consumes the
k-th element of all three, whether or not the arrival changes anything.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Tuple

import numpy as np

from . import _kernels as K
from .lattice import LEFT_FIRST, RIGHT_FIRST, ModelSpec

__all__ = ["MIXER_ID", "SiteStream", "derive_stream", "derive_seed", "cumulative", "run_metadata"]

MIXER_ID = K.MIXER_ID
_MASK = (1 << 64) - 1


def _u64(x: int) -> np.uint64:
    if not 0 <= x <= _MASK:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {x}")
    return np.uint64(x)


def derive_seed(seed: int, index: int) -> int:
    """Sub-seed for replica ``index`` of a batch run from ``seed``."""
    return int(K.mix64(K.site_key(_u64(seed), np.uint64(index)) ^ np.uint64(0xA5A5A5A5A5A5A5A5)))


def cumulative(probs: Sequence[float]) -> np.ndarray:
    cum = np.cumsum(np.asarray(probs, dtype=np.float64))
    cum[-1] = 1.0
    return cum


@dataclass
class SiteStream:
    """Lazily evaluated randomness for one site.

    ``law`` is the cumulative distribution used for the type draw; for the
    coupled dynamics it is a law over type pairs and ``outcomes`` maps the
    drawn index to the pair.
    """

    site: int
    key: int
    cum: np.ndarray
    infinite: bool = False
    outcomes: Tuple | None = None
    k: int = 0
    time: float = 0.0
    _ukey: np.uint64 = field(init=False, repr=False)

    def __post_init__(self):
        self._ukey = np.uint64(self.key)

    def peek_time(self) -> float:
        return self.time + float(K.gap(self._ukey, self.k))

    def next_arrival(self):
        """Return ``(time, type, ordering)`` for the next arrival and advance."""
        k = self.k
        self.time += float(K.gap(self._ukey, k))
        if self.outcomes is not None:
            u = float(K.uniform(self._ukey, K.TYPE, k))
            kind = self.outcomes[int(K.categorical(u, self.cum))]
        else:
            kind = int(K.arrival_type(self._ukey, self.site, k, self.cum, self.infinite))
        order = LEFT_FIRST if K.left_first(self._ukey, k) else RIGHT_FIRST
        self.k = k + 1
        return self.time, kind, order

    def state(self) -> tuple:
        return (self.site, self.key, self.k, self.time, tuple(self.cum.tolist()))


def derive_stream(seed: int, site: int, spec: ModelSpec) -> SiteStream:
    """Stream for ``site`` under master ``seed``; a pure function of its inputs."""
    key = int(K.site_key(_u64(seed), np.uint64(site)))
    if spec.infinite:
        return SiteStream(site, key, np.array([spec.p1, 1.0]), infinite=True)
    return SiteStream(site, key, cumulative(spec.rates))


def joint_stream(seed: int, site: int, law: Mapping[Tuple[int, int], float]) -> SiteStream:
    """Stream whose type draw is a pair from ``law`` (coupled dynamics)."""
    key = int(K.site_key(_u64(seed), np.uint64(site)))
    pairs = tuple(sorted(law))
    return SiteStream(site, key, cumulative([law[p] for p in pairs]), outcomes=pairs)


def run_metadata(seed: int, spec: ModelSpec | None = None, **extra) -> dict:
    meta = {"seed": int(seed), "mixer": MIXER_ID}
    if spec is not None:
        meta["spec"] = spec.to_dict()
    meta.update(extra)
    return meta
