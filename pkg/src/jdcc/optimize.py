"""Rate-constrained MAP denoising of chain-coded contours.

The estimate must copy the first ``depth`` edges of the observation, end
on the observation's last edge, and be no longer than the observation.
Within those constraints a memoized two-phase recursion (good state /
burst state) minimizes

    burst error cost  +  prior_weight * summed window straightness
                      +  rate_weight * model bits

where the burst error cost charges one event constant per burst, one
wrong-symbol cost per substituted symbol, and one insertion cost per
extra observed symbol. Histories used as memo keys are truncated to the
longest suffix-tree match (never below what the prior window needs),
which cannot change any conditional probability.
"""

from __future__ import annotations

import heapq
import math
import time
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .coder import encode
from .context import ContextTree, TotalSuffixTree, _IDX, build_tst, estimate_rate
from .contour import (
    DccString,
    Edge,
    GridBounds,
    SYMBOLS,
    chord_deviation,
    next_edge,
    prior_cost,
    realize,
    straightness,
)
from .exceptions import InfeasibleError, RateBudgetError
from .noise import BurstCosts, TransitionParams

INF = math.inf


@dataclass(frozen=True)
class ObjectiveConfig:
    """Everything the objective needs besides the observation itself."""

    costs: BurstCosts
    tree: ContextTree
    tst: TotalSuffixTree
    rate_weight: float = 0.0
    prior_weight: float = 3.0
    prior_span: int = 4
    bounds: GridBounds | None = None

    def __post_init__(self):
        if self.rate_weight < 0 or self.prior_weight < 0 or self.prior_span < 1:
            raise ValueError("weights must be nonnegative and prior_span positive")

    @classmethod
    def create(
        cls,
        tree: ContextTree,
        params: TransitionParams,
        rate_weight: float = 0.0,
        prior_weight: float = 3.0,
        prior_span: int = 4,
        bounds: GridBounds | None = None,
    ) -> "ObjectiveConfig":
        return cls(
            costs=BurstCosts.from_params(params),
            tree=tree,
            tst=build_tst(tree),
            rate_weight=rate_weight,
            prior_weight=prior_weight,
            prior_span=prior_span,
            bounds=bounds,
        )


@dataclass(frozen=True)
class Solution:
    """Denoised contour plus its objective value and breakdown."""

    contour: DccString
    cost: float
    error_cost: float
    prior_cost: float
    rate_bits: float


def _burst_error_cost(
    xhat: DccString, y: DccString, costs: BurstCosts, depth: int
) -> float:
    """Cheapest burst accounting of ``xhat`` against observation ``y``.

    Alignment over (estimate position, observation position, phase) with
    the same moves as the denoiser: matched symbols are free, opening a
    burst costs the event constant plus one wrong symbol plus one
    insertion-class exit, burst continuation costs one wrong symbol, and
    closing on observed edge k charges one insertion per skipped symbol.
    """
    if (
        xhat.rel[: depth - 1] != y.rel[: depth - 1]
        or xhat.start != y.start
        or xhat.first_dir != y.first_dir
    ):
        raise ValueError("estimate does not copy the observation prefix")
    open_cost = costs.event_cost + costs.wrong_symbol_cost + costs.insertion_cost
    xe = realize(xhat)
    ye = realize(y)
    nx, ny = len(xe), len(ye)
    ymap: dict[Edge, list[int]] = {}
    for k, e in enumerate(ye, start=1):
        ymap.setdefault(e, []).append(k)

    def relax(table, key, val):
        if val < table.get(key, INF):
            table[key] = val

    good: dict[int, float] = {depth: 0.0}  # consumed y edges -> best cost, aligned
    bad: dict[int, float] = {}  # the estimate edge is fixed per step
    for i in range(depth + 1, nx + 1):
        sym = xhat.rel[i - 2]
        ne = xe[i - 1]
        ngood: dict[int, float] = {}
        nbad: dict[int, float] = {}
        for m, c in good.items():
            if m >= ny:
                continue
            if sym == y.rel[m - 1]:
                relax(ngood, m + 1, c)
            else:
                relax(nbad, m + 1, c + open_cost)
        for m, c in bad.items():
            for k in ymap.get(ne, []):
                if k >= m + 1:
                    relax(ngood, k, c + costs.insertion_cost * (k - m - 1))
            relax(nbad, m, c + costs.wrong_symbol_cost)
        good, bad = ngood, nbad
    return good.get(ny, INF)


def _window_straightness(recent_label: str, sym: str, span: int) -> float:
    # window turns, oldest first, ending with the newly chosen symbol; the
    # window's own first turn only rotates the shape, so a straight lead
    # symbol stands in for it
    turns = recent_label[: span - 1][::-1] + sym
    return straightness("s" + turns)


def joint_denoise(
    y: DccString,
    cfg: ObjectiveConfig,
    use_suffix_truncation: bool = True,
    _counters: dict | None = None,
) -> Solution:
    """Minimize the rate-constrained MAP objective for one observation.

    States are explored best-first in order of accumulated cost plus an
    admissible burst heuristic, so each state is settled at most once and
    the first finished state carries the exact minimum. Every move cost is
    nonnegative because the burst-open constant is -ln(p q1 q2) > 0.

    Observations no longer than the context depth pass through untouched.
    Raises InfeasibleError when the constraints exclude every estimate
    (possible only with bounds that exclude the observation itself).
    """
    depth = max(cfg.tree.depth, 1)  # the first edge is header data, always kept
    span = cfg.prior_span
    ly = len(y)
    if ly <= depth:
        warnings.warn(f"observation of {ly} edges is within the context depth; passed through")
        return _score(y, y, cfg)

    ye = realize(y)
    if cfg.bounds is not None and any(not cfg.bounds.contains(e.m, e.n) for e in ye):
        raise InfeasibleError("observation leaves the configured bounds")
    target = ye[-1]
    ymap: dict[Edge, list[int]] = {}
    for k, e in enumerate(ye, start=1):
        ymap.setdefault(e, []).append(k)
    y_m = [e.m for e in ye]
    y_n = [e.n for e in ye]

    lam = cfg.rate_weight
    beta = cfg.prior_weight
    costs = cfg.costs
    open_cost = costs.event_cost + costs.wrong_symbol_cost + costs.insertion_cost
    c_wrong = costs.wrong_symbol_cost
    c_ins = costs.insertion_cost
    tree = cfg.tree
    bounds = cfg.bounds
    tst = cfg.tst

    keep_cache: dict[str, str] = {}

    def keep(label: str) -> str:
        kept = keep_cache.get(label)
        if kept is None:
            if lam == 0.0:
                need = 0  # probabilities never queried, only the prior window
            elif use_suffix_truncation:
                need = len(tst.truncate_label(label))
            else:
                need = min(len(label), depth)
            kept = label[: max(need, min(span - 1, len(label)))]
            keep_cache[label] = kept
        return kept

    window_cache: dict[str, float] = {}
    dist_cache: dict[str, tuple] = {}

    def window_dev(label: str, sym: str) -> float:
        turns = label[: span - 1][::-1] + sym
        w = window_cache.get(turns)
        if w is None:
            w = straightness("s" + turns)
            window_cache[turns] = w
        return w

    def step_cost(label: str, sym: str) -> float:
        # local cost with the prior window active; valid for positions
        # beyond the span, which covers every position once depth >= span
        f = beta * window_dev(label, sym) if beta > 0.0 else 0.0
        if lam > 0.0:
            dist = dist_cache.get(label)
            if dist is None:
                dist = tree.distribution_for_label(label)
                dist_cache[label] = dist
            f -= lam * math.log2(dist[_IDX[sym]])
        return f

    def local(i: int, label: str, sym: str) -> float:
        if i > span:
            return step_cost(label, sym)
        f = 0.0
        if lam > 0.0:
            dist = dist_cache.get(label)
            if dist is None:
                dist = tree.distribution_for_label(label)
                dist_cache[label] = dist
            f -= lam * math.log2(dist[_IDX[sym]])
        return f

    # Relaxed backward bound on the cost to finish from matched index m:
    # drop the position budget, keep the label so unavoidable prior and
    # rate charges along the observation remain, and price every burst at
    # its event constant plus insertions plus one wrong symbol per step of
    # endpoint displacement it must bridge. Only valid when the prior
    # window is active at every searched step.
    use_table = depth >= span or beta == 0.0
    h_good: dict[str, list[float]] | None = None
    ym_arr = np.array(y_m, dtype=np.float64)
    yn_arr = np.array(y_n, dtype=np.float64)
    steps_arr = np.arange(ly + 1, dtype=np.float64)
    hm_arr = np.zeros(ly + 1)
    if use_table:
        labels_all = [keep(y.rel[: depth - 1][::-1])]
        seen_labels = set(labels_all)
        qi = 0
        while qi < len(labels_all):
            lab = labels_all[qi]
            qi += 1
            for sym in SYMBOLS:
                nl = keep(sym + lab)
                if nl not in seen_labels:
                    seen_labels.add(nl)
                    labels_all.append(nl)
        h_good = {lab: [0.0] * (ly + 1) for lab in labels_all}
        for m in range(ly - 1, depth - 1, -1):
            obs = y.rel[m - 1]
            if m + 2 <= ly:
                # close on edge k >= m+2: bridge from the endpoint of the
                # matched edge m, skipping k-m-2 observed symbols
                em, en = y_m[m - 1], y_n[m - 1]
                span_l1 = np.abs(ym_arr[m + 1 :] - em) + np.abs(yn_arr[m + 1 :] - en)
                burst = open_cost + float(
                    np.min(
                        c_wrong * np.maximum(span_l1 - 2.0, 0.0)
                        + c_ins * steps_arr[: ly - m - 1]
                        + hm_arr[m + 2 :]
                    )
                )
            else:
                burst = INF
            hm = INF
            for lab in labels_all:
                via_match = step_cost(lab, obs) + h_good[keep(obs + lab)][m + 1]
                v = via_match if via_match < burst else burst
                h_good[lab][m] = v
                if v < hm:
                    hm = v
            hm_arr[m] = hm

    def heur_good(label: str, m: int) -> float:
        if h_good is None:
            return 0.0
        return h_good[label][m]

    if use_table:

        def heur_bad(e: Edge, m: int) -> float:
            # close on edge k >= m+1 after bridging the remaining gap
            if m + 1 > ly:
                return INF
            l1 = np.abs(ym_arr[m:] - e.m) + np.abs(yn_arr[m:] - e.n)
            return float(
                np.min(
                    c_wrong * np.maximum(l1 - 1.0, 0.0)
                    + c_ins * steps_arr[: ly - m]
                    + hm_arr[m + 1 :]
                )
            )

    else:

        def heur_bad(e: Edge, m: int) -> float:
            if m + 1 > ly:
                return INF
            d = min(abs(e.m - pm) + abs(e.n - pn) for pm, pn in zip(y_m, y_n))
            return c_wrong * max(0, d - 1)

    def feasible(e: Edge, i: int) -> bool:
        if bounds is not None and not bounds.contains(e.m, e.n):
            return False
        return abs(e.m - target.m) + abs(e.n - target.n) <= ly - i

    # nodes: (0, i, label, m) in the good phase with the current edge pinned
    # to ye[m-1]; (1, i, label, e, m) inside a burst
    start = (0, depth + 1, keep(y.rel[: depth - 1][::-1]), depth)
    dist_to: dict[tuple, float] = {start: 0.0}
    parent: dict[tuple, tuple[str, tuple]] = {}
    heap: list = [(0.0, -depth, 0, start)]
    seq = 0
    settled: set = set()
    goal = None
    # Dominance between states that differ only in position or matched
    # index: with close costs rebased by c_ins per matched symbol, a state
    # with smaller i, smaller m, and no larger rebased cost can do anything
    # a larger one can at no larger total cost, so the larger one is dead.
    good_seen: dict[tuple, int] = {}  # (label, m) -> smallest settled i
    bad_seen: dict[tuple, list] = {}  # (label, e) -> Pareto (i, m, g - c_ins*m)

    while heap:
        f_pop, _, _, node = heapq.heappop(heap)
        if node in settled:
            continue
        settled.add(node)
        if node[0] == 0 and node[3] == ly:
            goal = node
            break
        g = dist_to[node]

        def push(child, cost, sym, h):
            # ties in f are broken toward larger matched index, which
            # drills through equal-cost plateaus without affecting the
            # optimality of the first settled goal
            nonlocal seq
            ng = g + cost
            if ng < dist_to.get(child, INF):
                dist_to[child] = ng
                parent[child] = (sym, node)
                seq += 1
                heapq.heappush(heap, (ng + h, -child[3 if child[0] == 0 else 4], seq, child))

        if node[0] == 0:
            _, i, label, m = node
            if i > ly:
                continue
            dkey = (label, m)
            prev_i = good_seen.get(dkey)
            if prev_i is not None and prev_i <= i:
                continue
            good_seen[dkey] = i
            e = ye[m - 1]
            obs = y.rel[m - 1]
            for sym in SYMBOLS:
                ne = next_edge(e, sym)
                if not feasible(ne, i):
                    continue
                f = local(i, label, sym)
                nlabel = keep(sym + label)
                if sym == obs:
                    if good_seen.get((nlabel, m + 1), ly + 9) > i + 1:
                        push((0, i + 1, nlabel, m + 1), f, sym, heur_good(nlabel, m + 1))
                else:
                    h = heur_bad(ne, m + 1)
                    if h < INF:
                        push((1, i + 1, nlabel, ne, m + 1), open_cost + f, sym, h)
        else:
            _, i, label, e, m = node
            if i > ly:
                continue
            dkey = (label, e)
            gt = g - c_ins * m
            front = bad_seen.setdefault(dkey, [])
            if any(i0 <= i and m0 <= m and gt0 <= gt for i0, m0, gt0 in front):
                continue
            front[:] = [(i0, m0, gt0) for i0, m0, gt0 in front
                        if not (i <= i0 and m <= m0 and gt <= gt0)]
            front.append((i, m, gt))
            for sym in SYMBOLS:
                ne = next_edge(e, sym)
                if not feasible(ne, i):
                    continue
                f = local(i, label, sym)
                nlabel = keep(sym + label)
                for k in ymap.get(ne, []):
                    if k >= m + 1:
                        push(
                            (0, i + 1, nlabel, k),
                            c_ins * (k - m - 1) + f,
                            sym,
                            heur_good(nlabel, k),
                        )
                h = heur_bad(ne, m)
                if h < INF:
                    push((1, i + 1, nlabel, ne, m), c_wrong + f, sym, h)

    if goal is None:
        raise InfeasibleError("no feasible estimate reaches the final observed edge")
    if _counters is not None:
        _counters["computed"] = len(settled)
        _counters["memo"] = len(dist_to)
        _counters["dp_cost"] = dist_to[goal] + _prefix_prior(y, beta, span, depth)

    chosen = []
    node = goal
    while node != start:
        sym, prev = parent[node]
        chosen.append(sym)
        node = prev
    rel = y.rel[: depth - 1] + "".join(reversed(chosen))
    xhat = DccString(y.start, y.first_dir, rel, closed=y.closed)
    return _score(xhat, y, cfg)


def _prefix_prior(y: DccString, beta: float, span: int, depth: int) -> float:
    """Prior windows that lie entirely inside the copied prefix."""
    if beta == 0.0 or depth < span + 1:
        return 0.0
    pts = y.points()
    total = 0.0
    for i in range(span + 1, depth + 1):
        total += chord_deviation(pts[i - span - 1 : i + 1])
    return beta * total


def _score(xhat: DccString, y: DccString, cfg: ObjectiveConfig) -> Solution:
    depth = max(cfg.tree.depth, 1)
    err = _burst_error_cost(xhat, y, cfg.costs, depth) if len(y) > depth else 0.0
    pri = prior_cost(xhat, cfg.prior_weight, cfg.prior_span)
    rate = estimate_rate(cfg.tree, xhat, depth + 1)
    return Solution(
        contour=xhat,
        cost=err + pri + cfg.rate_weight * rate,
        error_cost=err,
        prior_cost=pri,
        rate_bits=rate,
    )


def brute_force(y: DccString, cfg: ObjectiveConfig, limit: int = 8) -> Solution:
    """Exhaustive minimum of the same objective, for small observations.

    Enumerates every estimate that copies the prefix, stays within length,
    and ends on the final observed edge; candidates are visited in
    lexicographic symbol order so cost ties keep the smallest string.
    """
    ly = len(y)
    if ly > limit:
        raise ValueError(f"observation has {ly} edges, above the brute-force limit {limit}")
    depth = max(cfg.tree.depth, 1)
    if ly <= depth:
        return _score(y, y, cfg)
    ye = realize(y)
    if cfg.bounds is not None and any(not cfg.bounds.contains(e.m, e.n) for e in ye):
        raise InfeasibleError("observation leaves the configured bounds")
    target = ye[-1]
    prefix = y.rel[: depth - 1]
    best: Solution | None = None

    def visit(rel: list[str], e: Edge):
        nonlocal best
        i = depth + len(rel)  # edges so far
        if e == target and i > depth:
            cand = DccString(y.start, y.first_dir, prefix + "".join(rel), closed=y.closed)
            sol = _score(cand, y, cfg)
            if sol.cost < INF and (best is None or sol.cost < best.cost - 0.0):
                best = sol
        if i >= ly:
            return
        for sym in SYMBOLS:
            ne = next_edge(e, sym)
            if cfg.bounds is not None and not cfg.bounds.contains(ne.m, ne.n):
                continue
            if abs(ne.m - target.m) + abs(ne.n - target.n) > ly - i - 1:
                continue
            rel.append(sym)
            visit(rel, ne)
            rel.pop()

    visit([], ye[depth - 1])
    if best is None:
        raise InfeasibleError("no feasible estimate reaches the final observed edge")
    return best


def lambda_search(
    y: DccString, cfg: ObjectiveConfig, rate_budget: float, max_iter: int = 40
) -> Solution:
    """Smallest rate weight whose optimum fits the bit budget.

    Doubles the weight until the solution rate drops under the budget,
    then bisects; the achieved rate is piecewise constant in the weight,
    so the search stops once the bracket is narrower than 1e-4 or the
    budget is hit exactly.
    """
    if rate_budget <= 0:
        raise ValueError("rate budget must be positive")
    sol = joint_denoise(y, replace(cfg, rate_weight=0.0))
    if sol.rate_bits <= rate_budget:
        return sol
    lo, hi = 0.0, 1.0
    sol_hi = joint_denoise(y, replace(cfg, rate_weight=hi))
    doublings = 0
    while sol_hi.rate_bits > rate_budget:
        doublings += 1
        if doublings > max_iter:
            raise RateBudgetError(f"budget of {rate_budget} bits unreachable")
        lo, hi = hi, hi * 2.0
        sol_hi = joint_denoise(y, replace(cfg, rate_weight=hi))
    while hi - lo > 1e-4:
        mid = (lo + hi) / 2.0
        sol_mid = joint_denoise(y, replace(cfg, rate_weight=mid))
        if sol_mid.rate_bits <= rate_budget:
            hi, sol_hi = mid, sol_mid
            if sol_mid.rate_bits == rate_budget:
                break
        else:
            lo = mid
    return sol_hi


def separate_baseline(
    y: DccString, cfg: ObjectiveConfig, beta_schedule: Sequence[float]
) -> list[tuple[float, Solution, int]]:
    """Denoise-then-compress baseline: unconstrained MAP at each smoothing
    weight, then lossless coding of the result. Returns
    (beta, solution, payload_bits) per schedule entry."""
    if list(beta_schedule) != sorted(beta_schedule):
        raise ValueError("beta schedule must be nondecreasing")
    out = []
    for beta in beta_schedule:
        sol = joint_denoise(y, replace(cfg, rate_weight=0.0, prior_weight=beta))
        bits = encode([sol.contour], cfg.tree).payload_bits
        out.append((beta, sol, bits))
    return out


_CONFIG_KEYS = ("lambda", "beta", "ds", "p", "q1", "q2", "rmax", "seed")


def parse_config_text(text: str) -> dict[str, float]:
    """key=value config lines; keys are case-insensitive."""
    out: dict[str, float] = {}
    for tok in text.split():
        if tok.startswith("#"):
            continue
        if "=" not in tok:
            raise ValueError(f"expected key=value, got {tok!r}")
        key, _, val = tok.partition("=")
        key = key.strip().lower()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"unknown config key {key!r}")
        out[key] = float(val)
    return out


def format_config_text(values: dict[str, float]) -> str:
    parts = []
    for key in _CONFIG_KEYS:
        if key in values:
            shown = "Ds" if key == "ds" else key
            parts.append(f"{shown}={values[key]!r}")
    return " ".join(parts) + "\n"


def timed(fn, *args, **kwargs):
    """Run fn and also return elapsed wall milliseconds."""
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, (time.perf_counter() - t0) * 1000.0
