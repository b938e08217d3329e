"""Scores for right-hand blocks, generator drift of the weight, and the
certificate / fixed-point / threshold machinery built on them.

Local picture used throughout: the last two 1's of the origin block, its
terminating 0 (the *leading zero*), the scored block of length ``L`` and a
follower *scenario* to its right::

    cells = [1, 1, 0, *block, *scenario]
                   ^ index 2

Drift is computed from the arrival rule itself: every arrival that can
change the weight is enumerated, together with its reaction choices, and
the weight change is read off the post-event configuration.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import _kernels
from .lattice import INFINITE, canonical_window

__all__ = [
    "PESSIMISTIC",
    "TABLE1",
    "canonicalize",
    "block_str",
    "enumerate_blocks",
    "reference_block",
    "ScoreTable",
    "table1",
    "DriftReport",
    "drift",
    "enumerate_followers",
    "WorstCase",
    "worst_case_drift",
    "Certificate",
    "verify_certificate",
    "SolverConfig",
    "SolveReport",
    "DriftSystem",
    "fixed_point_solve",
    "test_reference_block",
    "ThresholdResult",
    "threshold_search",
]

PESSIMISTIC = "pessimistic"
JOINT = "joint"
TERMWISE = "termwise"
_MODES = (JOINT, TERMWISE)

Block = Tuple[int, ...]
_LEAD = 2  # index of the leading zero in the local cells

# block: (score, printed drift at p1 = 0.47, worst-case follower(s))
TABLE1: Dict[str, Tuple[float, float, str]] = {
    "222": (0.000, 0.0007, "2"),
    "220": (0.163, 0.0012, "2"),
    "202": (0.295, 0.0022, "2"),
    "203": (0.339, 0.0002, "3"),
    "022": (0.354, 0.0034, "2"),
    "200": (0.404, 0.0002, "2"),
    "201": (0.493, 0.0018, "00"),
    "020": (0.498, 0.0031, "2"),
    "002": (0.570, 0.0032, "2"),
    "000": (0.664, 0.0055, "2"),
    "001": (0.827, 0.0058, "00"),
    "010": (0.920, 0.0044, "2"),
    "102": (1.008, 0.0034, "22"),
    "100": (1.157, 0.0036, "22"),
    "011": (1.173, 0.0060, "00"),
    "101": (1.456, 0.0056, "00,02"),
    "110": (1.555, 0.0040, "222"),
    "111": (1.997, 0.0054, "0222"),
}


def _as_symbols(block: Union[str, Sequence[int]]) -> Tuple[int, ...]:
    if isinstance(block, str):
        if not block.isdigit():
            raise ValueError(f"block text must be digits: {block!r}")
        return tuple(int(c) for c in block)
    return tuple(int(c) for c in block)


def _adjacent_ok(symbols: Sequence[int], infinite: bool = False) -> bool:
    for a, b in zip(symbols, symbols[1:]):
        if a and b and a != b:
            return False
        if infinite and a > 1 and b > 1:
            return False
    return True


def canonicalize(block: Union[str, Sequence[int]]) -> Block:
    """Relabel non-{0,1} gases 2, 3, ... by first appearance.

    >>> canonicalize("304")
    (2, 0, 3)
    """
    symbols = _as_symbols(block)
    if any(s < 0 for s in symbols):
        raise ValueError("symbols must be nonnegative")
    if not _adjacent_ok(symbols):
        raise ValueError(f"adjacent distinct gases in block {symbols}")
    return canonical_window(symbols)


def block_str(block: Sequence[int]) -> str:
    return "".join(map(str, block))


def _label_cap(n: float, length: int) -> int:
    if n == INFINITE:
        return length
    return int(n) - 1


def _valid_canonical(seq: Sequence[int], n: float) -> bool:
    infinite = n == INFINITE
    if not _adjacent_ok(seq, infinite):
        return False
    labels = [s for s in seq if s > 1]
    if infinite and len(set(labels)) != len(labels):
        return False
    if len(set(labels)) > _label_cap(n, len(seq)):
        return False
    return canonical_window(seq) == tuple(seq)


def _extensions(prefix: Block, n: float) -> List[int]:
    """Symbols that can follow ``prefix`` in a canonical sequence."""
    labels = {s for s in prefix if s > 1}
    nxt = 2 + len(labels)
    cands = [0, 1] + sorted(labels)
    if nxt - 1 <= _label_cap(n, len(prefix) + 1):
        cands.append(nxt)
    return [c for c in cands if _valid_canonical(prefix + (c,), n)]


def enumerate_blocks(L: int, n: float) -> List[Block]:
    """All canonical blocks of length ``L``, sorted lexicographically."""
    if L < 1:
        raise ValueError("block length must be >= 1")
    if n != INFINITE and (int(n) != n or n < 2):
        raise ValueError("n must be an integer >= 2 or INFINITE")
    out: List[Block] = [()]
    for _ in range(L):
        out = [p + (c,) for p in out for c in _extensions(p, n)]
    return sorted(out)


def _rank(block: Block) -> Tuple[int, ...]:
    # 1 > 0 > any other gas, most significant on the left
    return tuple(2 if s == 1 else 1 if s == 0 else 0 for s in block)


def reference_block(blocks: Iterable[Block]) -> Block:
    """The least favourable block for the 1's (all 2's whenever allowed)."""
    return min(blocks, key=lambda b: (_rank(b), b))


class ScoreTable:
    """Mapping from canonical blocks of one length to scores."""

    def __init__(self, L: int, scores: Mapping[Union[str, Block], float]):
        self.L = int(L)
        self.scores: Dict[Block, float] = {}
        for k, v in scores.items():
            b = canonicalize(k)
            if len(b) != self.L:
                raise ValueError(f"block {k!r} has length {len(b)}, expected {self.L}")
            self.scores[b] = float(v)

    def score(self, block: Union[str, Sequence[int]]) -> float:
        b = canonicalize(block)
        try:
            return self.scores[b]
        except KeyError:
            raise KeyError(f"score table has no entry for block {block_str(b)}") from None

    def __getitem__(self, block) -> float:
        return self.score(block)

    def __len__(self):
        return len(self.scores)

    def covers(self, blocks: Iterable[Block]) -> bool:
        return all(b in self.scores for b in blocks)

    @property
    def reference(self) -> Block:
        return reference_block(self.scores)

    def rounded(self, decimals: int) -> "ScoreTable":
        return ScoreTable(self.L, {b: round(v, decimals) for b, v in self.scores.items()})

    def vector(self, blocks: Sequence[Block]) -> np.ndarray:
        return np.array([self.scores[b] for b in blocks], dtype=np.float64)

    def to_dict(self) -> Dict[str, float]:
        return {block_str(b): v for b, v in sorted(self.scores.items())}

    @classmethod
    def zeros(cls, L: int, n: float) -> "ScoreTable":
        return cls(L, {b: 0.0 for b in enumerate_blocks(L, n)})

    def __repr__(self):
        body = ", ".join(f"{k}: {v:.4f}" for k, v in self.to_dict().items())
        return f"ScoreTable(L={self.L}, {{{body}}})"


def table1() -> ScoreTable:
    """The published length-3 scores for four gases."""
    return ScoreTable(3, {k: v[0] for k, v in TABLE1.items()})


# ---------------------------------------------------------------------------
# ab initio local drift
# ---------------------------------------------------------------------------

# One arrival outcome: (rate class, probability, block-length change, new window).
# Rate class "p1" is gas 1, "other" is one non-1 gas.  A window of None lies
# beyond the known cells and is scored 0 (the pessimistic completion).
Outcome = Tuple[str, float, int, Optional[Block]]


def _gases(cells: Sequence[int], n: float) -> List[Tuple[int, str]]:
    present = sorted({c for c in cells if c > 1})
    if n == INFINITE:
        return [(1, "p1"), (max(present, default=1) + 1, "other")]
    fresh = max(present, default=1) + 1
    extra = int(n) - 1 - len(present)
    if extra < 0:
        raise ValueError(f"{len(present)} distinct non-1 gases exceed n - 1 = {int(n) - 1}")
    return [(1, "p1")] + [(g, "other") for g in present] + [(fresh + i, "other") for i in range(extra)]


def _post_weight(cells: List[int], L: int) -> Tuple[int, Optional[Block]]:
    e = 0
    while e < len(cells) and cells[e] == 1:
        e += 1
    # pessimistic: a 1-run reaching the end of the known cells stops there
    if e + L >= len(cells):
        return e - _LEAD, None
    return e - _LEAD, canonical_window(cells[e + 1:e + 1 + L])


def _site_outcomes(cells: Sequence[int], x: int, L: int, n: float) -> List[Outcome]:
    """Outcomes of every arrival at vacant site ``x`` (its right neighbor known)."""
    infinite = n == INFINITE
    out: List[Outcome] = []
    for gas, cls in _gases(cells, n):
        differing = []
        for y in (x - 1, x + 1):
            c = cells[y]
            if c != 0 and (c != gas or (infinite and gas > 1)):
                differing.append(y)
        if not differing:
            new = list(cells)
            new[x] = gas
            db, win = _post_weight(new, L)
            out.append((cls, 1.0, db, win))
            continue
        p = 1.0 / len(differing)
        for y in differing:
            new = list(cells)
            new[y] = 0
            db, win = _post_weight(new, L)
            out.append((cls, p, db, win))
    return out


def _completions(prefix: Block, length: int, n: float) -> List[Block]:
    out: List[Block] = [()]
    for _ in range(length):
        out = [c + (s,) for c in out for s in _extensions(prefix + c, n)]
    return out


def _site_alternatives(block: Block, scenario: Block, n: float) -> Dict[int, List[List[Outcome]]]:
    """Per-site outcome lists; a site whose right neighbor is unknown gets one
    alternative per possible completion of the missing cells."""
    L = len(block)
    known = (1, 1, 0) + block + scenario
    terms: Dict[int, List[List[Outcome]]] = {}
    for x in range(_LEAD, _LEAD + L + 2):
        need = x + 2 - len(known)
        if need <= 0:
            if known[x] == 0:
                terms[x] = [_site_outcomes(known, x, L, n)]
            continue
        alts = []
        for comp in _completions(block + scenario, need, n):
            cells = known + comp
            alts.append(_site_outcomes(cells, x, L, n) if cells[x] == 0 else [])
        terms[x] = alts
    return terms


def _rates(p1: float, n: float) -> Dict[str, float]:
    if not 0.0 <= p1 <= 1.0:
        raise ValueError(f"p1 must lie in [0, 1], got {p1}")
    other = 1.0 - p1 if n == INFINITE else (1.0 - p1) / (int(n) - 1)
    return {"p1": p1, "other": other}


def _value(outcomes: List[Outcome], table: ScoreTable, own: float, rates: Mapping[str, float]) -> float:
    total = 0.0
    for cls, p, db, win in outcomes:
        w = table.score(win) if win is not None else 0.0
        total += rates[cls] * p * (db + w - own)
    return total


@dataclass
class DriftReport:
    block: Block
    scenario: Tuple[Block, ...]
    value: float
    breakdown: Dict[int, float] = field(default_factory=dict)


def _scenario_tuple(block: Block, scenario, n: float) -> Block:
    """Canonicalize ``scenario`` jointly with ``block`` (labels flow across)."""
    s = _as_symbols(scenario)
    joint = block + s
    if not _adjacent_ok(joint, n == INFINITE):
        raise ValueError(f"scenario {block_str(s)} clashes with block {block_str(block)}")
    canon = canonical_window(joint)
    if canon[:len(block)] != block:
        raise ValueError("block must be canonical")
    if not _valid_canonical(canon, n):
        raise ValueError(f"scenario {block_str(s)} needs more gases than n = {n}")
    return canon[len(block):]


def drift(block, table: ScoreTable, p1: float, n: float, scenario="",
          completion=PESSIMISTIC) -> DriftReport:
    """Rate of change of the expected weight for ``block`` followed by ``scenario``.

    ``scenario`` is a follower string, or a sequence of them; with several,
    each site's contribution takes its least favourable follower (the
    mixed scenario such as ``"00,02"``).  ``completion`` is
    :data:`PESSIMISTIC` (unknown windows score 0, unknown neighbours take their
    worst case) or explicit symbols appended to every scenario, in which case
    anything still unknown is an error.  The origin block is taken to have
    length >= 2.
    """
    b = canonicalize(block)
    if len(b) != table.L:
        raise ValueError(f"block length {len(b)} differs from table length {table.L}")
    if isinstance(scenario, str):
        scenarios = scenario.split(",") if scenario else [""]
    elif scenario and not isinstance(scenario[0], (int, np.integer)):
        scenarios = list(scenario)
    else:
        scenarios = [scenario]
    value_completion = completion != PESSIMISTIC
    tail = _as_symbols(completion) if value_completion else ()
    rates = _rates(p1, n)
    own = table.score(b)
    per_site: Dict[int, float] = {}
    canon_scen = []
    for sc in scenarios:
        s = _scenario_tuple(b, tuple(_as_symbols(sc)) + tail, n)
        canon_scen.append(s)
        terms = _site_alternatives(b, s, n)
        for x in range(_LEAD, _LEAD + len(b) + 2):
            alts = terms.get(x, [[]])
            if value_completion and len(alts) > 1:
                raise ValueError(f"scenario too short to resolve arrivals at offset {x - _LEAD}")
            v = min(_value(a, table, own, rates) for a in alts)
            if value_completion:
                for _, _, _, win in alts[0]:
                    if win is None:
                        raise ValueError("scenario too short to resolve a post-event window")
            per_site[x] = min(per_site.get(x, math.inf), v)
    breakdown = {x - _LEAD: v for x, v in sorted(per_site.items())}
    return DriftReport(b, tuple(canon_scen), float(math.fsum(breakdown.values())), breakdown)


def enumerate_followers(block, K: int, n: float) -> List[Block]:
    """Follower prefixes of length <= ``K`` that fix every drift term of ``block``.

    Longer scenarios sharing one of these prefixes give identical drift, so
    the list stands for all canonical followers of length ``K``.
    """
    b = canonicalize(block)
    L = len(b)
    out: List[Block] = []

    def determined(s: Block) -> bool:
        if len(s) < 2:
            return False
        cells = (1, 1, 0) + b + s
        e = _LEAD + 1
        while e < len(cells) and cells[e] == 1:
            e += 1
        return e + L < len(cells)

    def rec(s: Block):
        if len(s) == K or determined(s):
            out.append(s)
            return
        for c in _extensions(b + s, n):
            rec(s + (c,))

    if K < 1:
        raise ValueError("K must be >= 1")
    rec(())
    return sorted(out)


@dataclass
class WorstCase:
    block: Block
    value: float
    mode: str
    scenario: Block
    site_scenarios: Dict[int, Block] = field(default_factory=dict)


def _pad(s: Block, K: int) -> Block:
    return s + (0,) * (K - len(s))


def worst_case_drift(block, table: ScoreTable, p1: float, n: float, K: int = 6,
                     mode: str = JOINT) -> WorstCase:
    """Least drift over all canonical followers of length ``K``.

    ``joint`` minimises the whole expression over one follower string;
    ``termwise`` minimises each site's contribution separately (a looser
    bound, reported with the per-site minimisers).  Ties go to the
    lexicographically first follower.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}")
    b = canonicalize(block)
    rates = _rates(p1, n)
    own = table.score(b)
    best_total, best_s = math.inf, ()
    site_best: Dict[int, Tuple[float, Block]] = {}
    for s in enumerate_followers(b, K, n):
        terms = _site_alternatives(b, s, n)
        total = 0.0
        for x in range(_LEAD, _LEAD + len(b) + 2):
            alts = terms.get(x, [[]])
            v = min(_value(a, table, own, rates) for a in alts)
            total += v
            if x not in site_best or v < site_best[x][0] - 1e-12:
                site_best[x] = (v, s)
        if total < best_total - 1e-12:
            best_total, best_s = total, s
    if mode == JOINT:
        return WorstCase(b, best_total, mode, _pad(best_s, K))
    value = math.fsum(v for v, _ in site_best.values())
    sites = {x - _LEAD: _pad(s, K) for x, (v, s) in sorted(site_best.items())}
    return WorstCase(b, value, mode, _pad(best_s, K), sites)


@dataclass
class Certificate:
    n: float
    p1: float
    L: int
    K: int
    mode: str
    table: ScoreTable
    worst: Dict[Block, WorstCase]
    completion: str = PESSIMISTIC

    @property
    def c(self) -> float:
        return min(w.value for w in self.worst.values())

    @property
    def verdict(self) -> str:
        return "POSITIVE" if self.c > 0 else "NEGATIVE"

    @property
    def argmin_block(self) -> Block:
        return min(self.worst, key=lambda k: self.worst[k].value)

    def to_dict(self) -> dict:
        return {
            "spec": {"n": "inf" if self.n == INFINITE else int(self.n), "p1": self.p1, "L": self.L},
            "K": self.K,
            "completion": self.completion,
            "mode": self.mode,
            "scores": {k: round(v, 12) for k, v in self.table.to_dict().items()},
            "worst_case_drift": {
                block_str(b): {"value": round(w.value, 12), "scenario": block_str(w.scenario)}
                for b, w in sorted(self.worst.items())
            },
            "c": round(self.c, 12),
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def verify_certificate(p1: float, n: float, L: int, table: ScoreTable, K: int = 6,
                       mode: str = JOINT) -> Certificate:
    """Worst-case drift of every block; positive minimum certifies the
    submartingale condition at these parameters."""
    blocks = enumerate_blocks(L, n)
    if table.L != L or not table.covers(blocks):
        raise ValueError("score table does not cover every block")
    worst = {b: worst_case_drift(b, table, p1, n, K, mode) for b in blocks}
    return Certificate(n, p1, L, K, mode, table, worst)


def test_reference_block(table: ScoreTable, p1: float, n: float, K: int = 6,
                         mode: str = TERMWISE) -> float:
    """Worst-case drift of the reference (all-2) block."""
    blocks = enumerate_blocks(table.L, n)
    return worst_case_drift(reference_block(blocks), table, p1, n, K, mode).value


test_reference_block.__test__ = False  # not a pytest test


# ---------------------------------------------------------------------------
# compiled system for the solver
# ---------------------------------------------------------------------------

def _symbolic(outcomes: List[Outcome], index: Mapping[Block, int], own: int) -> tuple:
    acc: Dict[tuple, float] = {}
    for cls, p, db, win in outcomes:
        acc[(-1, cls)] = acc.get((-1, cls), 0.0) + p * db
        if win is not None:
            k = (index[win], cls)
            acc[k] = acc.get(k, 0.0) + p
        k = (own, cls)
        acc[k] = acc.get(k, 0.0) - p
    return tuple(sorted((k, round(v, 12)) for k, v in acc.items() if abs(v) > 1e-15))


class DriftSystem:
    """All worst-case drift expressions for blocks of one length, compiled to
    sparse rows whose coefficients are linear in the two rate classes.

    Rows are deduplicated per (block, site) for termwise mode and per
    (block, follower) for joint mode.
    """

    def __init__(self, L: int, n: float, K: Optional[int] = None):
        self.L, self.n = L, n
        self.K = K if K is not None else L + 3
        if self.K < L + 1:
            raise ValueError("follower bound K must be >= L + 1")
        self.blocks = enumerate_blocks(L, n)
        self.index = {b: i for i, b in enumerate(self.blocks)}
        self.ref = self.index[reference_block(self.blocks)]
        self.site_rows: List[List[List[tuple]]] = []   # block -> site -> unique rows
        self.joint_rows: List[List[tuple]] = []        # block -> unique rows
        self.joint_scen: List[List[Block]] = []
        for b in self.blocks:
            own = self.index[b]
            per_site: Dict[int, Dict[tuple, None]] = {}
            joint: Dict[tuple, Block] = {}
            for s in enumerate_followers(b, self.K, n):
                terms = _site_alternatives(b, s, n)
                total: Dict[tuple, float] = {}
                for x in range(_LEAD, _LEAD + L + 2):
                    alts = terms.get(x, [[]])
                    if len(alts) != 1:
                        raise RuntimeError("follower prefix too short")  # cannot happen for K >= 2
                    row = _symbolic(alts[0], self.index, own)
                    per_site.setdefault(x, {})[row] = None
                    for k, v in row:
                        total[k] = total.get(k, 0.0) + v
                jrow = tuple(sorted((k, round(v, 12)) for k, v in total.items() if abs(v) > 1e-15))
                joint.setdefault(jrow, s)
            self.site_rows.append([list(r) for _, r in sorted(per_site.items())])
            self.joint_rows.append(list(joint))
            self.joint_scen.append([joint[r] for r in joint])

    def arrays(self, p1: float, mode: str = TERMWISE):
        """Numeric CSR-like layout for :func:`_kernels.gs_sweep`."""
        rates = _rates(p1, self.n)
        nb = len(self.blocks)
        site_block_ptr = [0]
        row_site_ptr = [0]
        const, own_coef, col_ptr, cols, vals = [], [], [0], [], []
        for blk in range(nb):
            groups = self.site_rows[blk] if mode == TERMWISE else [self.joint_rows[blk]]
            for rows in groups:
                for row in rows:
                    c = 0.0
                    oc = 0.0
                    coefs: Dict[int, float] = {}
                    for (k, cls), v in row:
                        w = rates[cls] * v
                        if k == -1:
                            c += w
                        elif k == blk:
                            oc += w
                        else:
                            coefs[k] = coefs.get(k, 0.0) + w
                    const.append(c)
                    own_coef.append(oc)
                    for k in sorted(coefs):
                        cols.append(k)
                        vals.append(coefs[k])
                    col_ptr.append(len(cols))
                row_site_ptr.append(row_site_ptr[-1] + len(rows))
            site_block_ptr.append(site_block_ptr[-1] + len(groups))
        i64 = lambda a: np.asarray(a, dtype=np.int64)
        f64 = lambda a: np.asarray(a, dtype=np.float64)
        return (i64(row_site_ptr), i64(site_block_ptr), f64(const), i64(col_ptr),
                i64(cols), f64(vals), f64(own_coef))

    def evaluate(self, scores: np.ndarray, p1: float, mode: str = TERMWISE) -> np.ndarray:
        """Worst-case drift of every block at ``scores`` (vector in block order)."""
        rsp, sbp, const, cp, cols, vals, oc = self.arrays(p1, mode)
        out = np.empty(len(self.blocks))
        for blk in range(len(self.blocks)):
            total = 0.0
            for s in range(sbp[blk], sbp[blk + 1]):
                best = math.inf
                for r in range(rsp[s], rsp[s + 1]):
                    v = const[r] + oc[r] * scores[blk] + vals[cp[r]:cp[r + 1]] @ scores[cols[cp[r]:cp[r + 1]]]
                    best = min(best, v)
                total += best
            out[blk] = total
        return out

    def table(self, scores: np.ndarray) -> ScoreTable:
        return ScoreTable(self.L, dict(zip(self.blocks, map(float, scores))))


@dataclass
class SolverConfig:
    L: int
    n: float
    p1: float
    tol: float = 1e-9
    max_iter: int = 10_000
    K: Optional[int] = None
    damping: float = 1.0
    mode: str = TERMWISE

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.K is not None and self.K < self.L + 1:
            raise ValueError("follower bound K must be >= L + 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        _rates(self.p1, self.n)


@dataclass
class SolveReport:
    converged: bool
    sweeps: int
    max_change: float
    residuals: Dict[str, float]
    reference_value: float


_SYSTEMS: Dict[tuple, DriftSystem] = {}


def _system(L: int, n: float, K: Optional[int]) -> DriftSystem:
    key = (L, n, K if K is not None else L + 3)
    if key not in _SYSTEMS:
        _SYSTEMS[key] = DriftSystem(L, n, key[2])
    return _SYSTEMS[key]


def fixed_point_solve(cfg: SolverConfig, initial: Optional[np.ndarray] = None):
    """Gauss-Seidel iteration setting every non-reference block's worst-case
    drift to zero, reference score pinned at 0.

    Returns ``(ScoreTable, SolveReport)``; non-convergence is reported, not
    raised.
    """
    system = _system(cfg.L, cfg.n, cfg.K)
    arrays = system.arrays(cfg.p1, cfg.mode)
    scores = np.zeros(len(system.blocks)) if initial is None else np.array(initial, dtype=float)
    scores[system.ref] = 0.0
    termwise = cfg.mode == TERMWISE
    change = math.inf
    sweeps = 0
    for sweeps in range(1, cfg.max_iter + 1):
        change = _kernels.gs_sweep(scores, system.ref, cfg.damping, *arrays, termwise)
        if not np.isfinite(change) or not np.all(np.isfinite(scores)):
            break
        if change < cfg.tol:
            break
    converged = bool(np.isfinite(change) and change < cfg.tol)
    resid = system.evaluate(scores, cfg.p1, cfg.mode) if np.all(np.isfinite(scores)) \
        else np.full(len(system.blocks), np.nan)
    report = SolveReport(converged, sweeps, float(change),
                         {block_str(b): float(r) for b, r in zip(system.blocks, resid)},
                         float(resid[system.ref]))
    return system.table(np.where(np.isfinite(scores), scores, np.nan)), report


@dataclass
class ThresholdResult:
    n: float
    L: int
    p1_star: Optional[float]
    p1_fixed_point: Optional[float]
    history: List[dict] = field(repr=False)
    certificate: Optional[Certificate] = field(repr=False)
    table: Optional[ScoreTable] = field(repr=False)
    message: str = ""


def threshold_search(n: float, L: int, K: Optional[int] = None, tol: float = 1e-4,
                     mode: str = TERMWISE, decimals: Optional[int] = 3,
                     max_iter: int = 20_000) -> ThresholdResult:
    """Smallest gas-1 rate admitting a positive certificate.

    Stage one bisects on "solver converges and the reference block's drift
    is positive", giving the fixed-point threshold.  Stage two freezes the
    scores found there, rounded to ``decimals`` places as a publishable
    table, and bisects on the rate at which every block's worst-case drift
    with those frozen scores is strictly positive.
    """
    if tol < 1e-4:
        raise ValueError("bisection tolerance must be >= 1e-4")
    system = _system(L, n, K)
    K = system.K
    history: List[dict] = []
    warm: Dict[float, np.ndarray] = {}

    def stage1(p1: float):
        start = warm[min(warm, key=lambda q: abs(q - p1))] if warm else None
        table, rep = fixed_point_solve(SolverConfig(L, n, p1, max_iter=max_iter, K=K, mode=mode), start)
        ok = rep.converged and rep.reference_value > 0
        if rep.converged:
            warm[p1] = table.vector(system.blocks)
        history.append({"stage": 1, "p1": p1, "converged": rep.converged,
                        "value": rep.reference_value, "pass": ok})
        return ok, table

    hi = 0.999
    ok, hi_table = stage1(hi)
    if not ok:
        return ThresholdResult(n, L, None, None, history, None, None, "no certificate at this L")
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        ok, table = stage1(mid)
        if ok:
            hi, hi_table = mid, table
        else:
            lo = mid
    p1_fixed = hi
    frozen = hi_table.rounded(decimals) if decimals is not None else hi_table

    def stage2(p1: float) -> bool:
        vals = system.evaluate(frozen.vector(system.blocks), p1, mode)
        c = float(vals.min())
        history.append({"stage": 2, "p1": p1, "converged": True, "value": c, "pass": c > 0})
        return c > 0

    lo2, hi2 = max(lo - 10 * tol, 0.0), 0.999
    if not stage2(hi2):
        return ThresholdResult(n, L, None, p1_fixed, history, None, frozen,
                               "frozen scores fail to certify at p1 = 0.999")
    if stage2(lo2):
        hi2 = lo2
    while hi2 - lo2 > tol:
        mid = 0.5 * (lo2 + hi2)
        if stage2(mid):
            hi2 = mid
        else:
            lo2 = mid
    cert = verify_certificate(hi2, n, L, frozen, K, mode)
    return ThresholdResult(n, L, hi2, p1_fixed, history, cert, frozen, "certified")
