"""
Same-different word discrimination.

Every evaluation pair is scored by its DTW cost; two segments are declared a
match at threshold ``tau`` when ``cost <= tau``. With ``M_all``, ``M_SW`` and
``M_SWDP`` the numbers of all, same-word and same-word-different-speaker
matches::

    precision(tau) = M_SW(tau) / M_all(tau)
    recall(tau)    = M_SWDP(tau) / |S_SWDP|

Recall deliberately ignores same-speaker pairs while precision counts them
as correct. Average precision is the right-step integral of precision over
recall, sweeping tau over the distinct observed costs.
"""

import csv
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import alignment
from .corpus_io import archive_index
from .errors import ZrkitError
from .pairs import DW, SW_DP, SW_SP, UTD, category_counts, segment_frames
from .parallel import chunked, map_ordered

_CODES = {SW_SP: 0, SW_DP: 1, DW: 2}
_NAMES = {v: k for k, v in _CODES.items()}


@dataclass(frozen=True)
class DtwConfig:
    band_fraction: float = 1.0

    def __post_init__(self):
        if not 0 < self.band_fraction <= 1:
            raise ZrkitError("band_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class PairCost:
    pair_index: int
    category: str
    cost: float


@dataclass(frozen=True)
class PrPoint:
    threshold: float
    precision: float
    recall: float
    m_all: int
    m_sw: int
    m_swdp: int


@dataclass
class EvalReport:
    average_precision: float
    curve: list
    counts: dict
    label: str = ""
    config: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def to_dict(self, include_curve=False):
        out = {
            "ap": self.average_precision,
            "label": self.label,
            "counts": dict(self.counts),
            "config": dict(self.config),
            "timings": dict(self.timings),
        }
        if include_curve:
            out["curve"] = [asdict(p) for p in self.curve]
        return out

    def write_json(self, path, include_curve=False):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(include_curve), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_curve_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["threshold", "precision", "recall", "m_all", "m_sw", "m_swdp"])
            for p in self.curve:
                writer.writerow([repr(p.threshold), repr(p.precision), repr(p.recall),
                                 p.m_all, p.m_sw, p.m_swdp])


def _pair_cost(xa, xb, band_fraction):
    if band_fraction >= 1.0:
        return alignment.dtw_cost(xa, xb)
    return alignment.dtw_cost_banded(xa, xb, band_fraction)


def score_pair_arrays(eval_pairs, archive, dtw_config=DtwConfig(), jobs=1):
    """Costs and category codes as arrays, indexed like `eval_pairs`."""
    eval_pairs = list(eval_pairs)
    index = archive_index(archive)
    cache = {}
    for p in eval_pairs:
        if p.category == UTD:
            raise ZrkitError("UTD pairs carry no word labels and cannot be evaluated")
        for s in (p.a, p.b):
            if s.key not in cache:
                cache[s.key] = segment_frames(s, index)
    costs = np.empty(len(eval_pairs))
    codes = np.array([_CODES[p.category] for p in eval_pairs], dtype=np.int8)
    band = dtw_config.band_fraction

    def work(block):
        lo, hi = block
        for k in range(lo, hi):
            p = eval_pairs[k]
            costs[k] = _pair_cost(cache[p.a.key], cache[p.b.key], band)

    # preallocated slots, one writer per index: no reduction needed
    jobs = 1 if jobs is None else jobs
    map_ordered(work, chunked(len(eval_pairs), max(1, jobs) * 4), jobs)
    return costs, codes


def score_pairs(eval_pairs, archive, dtw_config=DtwConfig(), jobs=1):
    costs, codes = score_pair_arrays(eval_pairs, archive, dtw_config, jobs)
    return [PairCost(k, _NAMES[int(c)], float(v)) for k, (v, c) in enumerate(zip(costs, codes))]


def _as_arrays(costs):
    if isinstance(costs, tuple):
        values, codes = costs
        return np.asarray(values, dtype=np.float64), np.asarray(codes, dtype=np.int8)
    values = np.array([c.cost for c in costs], dtype=np.float64)
    codes = np.array([_CODES[c.category] for c in costs], dtype=np.int8)
    return values, codes


def pr_curve(costs):
    """Precision/recall at every distinct observed cost, ascending.

    `costs` is a list of :class:`PairCost` or a ``(costs, codes)`` array pair.
    """
    values, codes = _as_arrays(costs)
    if np.any(np.isnan(values)):
        raise ZrkitError("NaN pair cost")
    n_swdp = int(np.sum(codes == _CODES[SW_DP]))
    if n_swdp == 0:
        raise ZrkitError("no SW-DP pairs: recall is undefined")
    order = np.argsort(values, kind="stable")
    v = values[order]
    c = codes[order]
    m_sw = np.cumsum(c != _CODES[DW])
    m_swdp = np.cumsum(c == _CODES[SW_DP])
    last = np.flatnonzero(np.append(v[1:] != v[:-1], True))
    curve = []
    for k in last:
        m_all = int(k) + 1
        curve.append(PrPoint(float(v[k]), int(m_sw[k]) / m_all, int(m_swdp[k]) / n_swdp,
                             m_all, int(m_sw[k]), int(m_swdp[k])))
    return curve


def average_precision(curve):
    """Right-step area under the PR curve: sum of (R_k - R_{k-1}) * P_k."""
    if not curve:
        raise ZrkitError("empty precision-recall curve")
    ap = 0.0
    prev = 0.0
    for p in curve:
        ap += (p.recall - prev) * p.precision
        prev = p.recall
    return ap


def evaluate(archive, eval_pairs, dtw_config=DtwConfig(), label="", jobs=1):
    """Score, sweep and summarize an evaluation pair set."""
    eval_pairs = list(eval_pairs)
    t0 = time.perf_counter()
    costs = score_pair_arrays(eval_pairs, archive, dtw_config, jobs)
    t1 = time.perf_counter()
    curve = pr_curve(costs)
    ap = average_precision(curve)
    t2 = time.perf_counter()
    counts = category_counts(eval_pairs)
    counts = {"S": counts["total"], "SW": counts["SW"], "SW-DP": counts[SW_DP],
              "SW-SP": counts[SW_SP], "DW": counts[DW]}
    return EvalReport(
        average_precision=ap,
        curve=curve,
        counts=counts,
        label=label,
        config={"band_fraction": dtw_config.band_fraction,
                "match_rule": "cost <= threshold",
                "distance": "cosine", "normalization": "path length"},
        timings={"scoring_seconds": t1 - t0, "curve_seconds": t2 - t1},
    )
