"""Three-state burst error channel for chain-coded contours.

State 0 passes symbols through unchanged. With probability p the channel
enters state 1 and emits wrong symbols (one per visit, self-loop 1-q1),
moves to state 2 where each self-loop (probability 1-q2) inserts an extra
symbol, then returns to state 0. One excursion 0 -> 1 -> 2 -> 0 is a burst
event; the observation therefore never gets shorter than the truth.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .contour import SYMBOLS, DccString
from .exceptions import AlignmentInfeasibleError
from .mask import GridMask

PARAM_FLOOR = 1e-6


@dataclass(frozen=True)
class TransitionParams:
    """Transition probabilities p (0->1), q1 (1->2), q2 (2->0)."""

    p: float
    q1: float
    q2: float

    def __post_init__(self):
        for name, v in (("p", self.p), ("q1", self.q1), ("q2", self.q2)):
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name}={v} must lie in (0, 1)")

    def to_text(self) -> str:
        return f"p={self.p!r} q1={self.q1!r} q2={self.q2!r}\n"

    @classmethod
    def from_text(cls, text: str) -> "TransitionParams":
        fields = _parse_kv(text)
        try:
            return cls(float(fields["p"]), float(fields["q1"]), float(fields["q2"]))
        except KeyError as exc:
            raise ValueError(f"missing parameter {exc}") from None


@dataclass(frozen=True)
class BurstCosts:
    """Negative-log costs of the linearized burst likelihood.

    event_cost is the per-burst constant, wrong_symbol_cost the price of
    each wrong symbol, insertion_cost the price of each extra symbol.
    event_cost can go negative for large p; the optimizer tolerates that,
    but the model stops penalizing bursts once event_cost plus
    insertion_cost is not positive.
    """

    event_cost: float
    wrong_symbol_cost: float
    insertion_cost: float

    @classmethod
    def from_params(cls, params: TransitionParams) -> "BurstCosts":
        p, q1, q2 = params.p, params.q1, params.q2
        return cls(
            event_cost=-(math.log(p) + math.log(q1 / (1 - q1)) + math.log(q2 / (1 - q2))),
            wrong_symbol_cost=-math.log(1 - q1),
            insertion_cost=-math.log(1 - q2),
        )


@dataclass(frozen=True)
class BurstAnnotation:
    """State-visit record of one channel traversal.

    state0_visits has one entry per good run: entry 0 counts the correct
    symbols before the first burst; every later entry counts the arrival
    from state 2 plus the correct symbols of that run, hence is at least 1.
    state1_visits[k] and state2_visits[k] count the visits during burst k,
    so burst k emitted state1_visits[k] wrong symbols and inserted
    state2_visits[k] - 1 extra ones.
    """

    state0_visits: tuple[int, ...]
    state1_visits: tuple[int, ...]
    state2_visits: tuple[int, ...]

    def __post_init__(self):
        k = len(self.state1_visits)
        if len(self.state2_visits) != k or len(self.state0_visits) != k + 1:
            raise ValueError("run lists are inconsistent")
        if any(v < 1 for v in self.state1_visits + self.state2_visits):
            raise ValueError("each burst visits states 1 and 2 at least once")
        if any(v < 1 for v in self.state0_visits[1:]) or self.state0_visits[0] < 0:
            raise ValueError("bad state-0 visit counts")

    @property
    def events(self) -> int:
        return len(self.state1_visits)

    @property
    def wrong_total(self) -> int:
        return sum(self.state1_visits)

    @property
    def state2_total(self) -> int:
        return sum(self.state2_visits)

    @property
    def good_total(self) -> int:
        return sum(self.state0_visits)

    @property
    def length_increase(self) -> int:
        return self.state2_total - self.events


def neg_log_likelihood_exact(ann: BurstAnnotation, params: TransitionParams) -> float:
    """Exact negative log probability of the recorded traversal."""
    k = ann.events
    p, q1, q2 = params.p, params.q1, params.q2
    return (
        -k * (math.log(p) + math.log(q1) + math.log(q2))
        - (ann.good_total - k) * math.log(1 - p)
        - (ann.wrong_total - k) * math.log(1 - q1)
        - (ann.state2_total - k) * math.log(1 - q2)
    )


def neg_log_likelihood_approx(
    events: int, wrong_total: int, length_increase: int, costs: BurstCosts
) -> float:
    """Linearized form: drops the log(1-p) term of the exact likelihood."""
    return (
        (costs.event_cost + costs.insertion_cost) * events
        + costs.wrong_symbol_cost * wrong_total
        + costs.insertion_cost * length_increase
    )


def corrupt_string(
    x: DccString, params: TransitionParams, seed=None
) -> tuple[DccString, BurstAnnotation]:
    """Push a contour through the channel; returns the observation and the
    exact state path taken. Deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    rel = x.rel
    n = len(rel)
    out: list[str] = []
    good_runs = [0]
    wrong_runs: list[int] = []
    insert_runs: list[int] = []
    i = 0
    while i < n:
        if rng.random() >= params.p:
            out.append(rel[i])
            good_runs[-1] += 1
            i += 1
            continue
        # burst: state 1 substitutes, state 2 inserts
        wrong = 0
        while True:
            true_sym = rel[i]
            others = [s for s in SYMBOLS if s != true_sym]
            out.append(others[int(rng.integers(2))])
            wrong += 1
            i += 1
            if i >= n or rng.random() < params.q1:
                break
        inserts = 0
        while rng.random() >= params.q2:
            out.append(SYMBOLS[int(rng.integers(3))])
            inserts += 1
        wrong_runs.append(wrong)
        insert_runs.append(inserts + 1)
        good_runs.append(1)  # arrival back in state 0 counts as a visit
    ann = BurstAnnotation(tuple(good_runs), tuple(wrong_runs), tuple(insert_runs))
    y = DccString(x.start, x.first_dir, "".join(out), closed=x.closed)
    return y, ann


def corrupt_mask(mask: GridMask, delta: float, seed=None) -> GridMask:
    """Flip pixels along the boundary: each boundary edge, with probability
    delta, copies one adjacent pixel over the other (side chosen evenly).
    Pixels outside the frame read as background and cannot be written."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    src = mask.pixels
    h, w = src.shape
    out = src.copy()

    def value(i, j) -> bool:
        return bool(src[i, j]) if 0 <= i < h and 0 <= j < w else False

    def maybe_flip(ai, aj, bi, bj):
        if value(ai, aj) == value(bi, bj):
            return
        if rng.random() >= delta:
            return
        if rng.integers(2) == 0:
            ti, tj, si, sj = ai, aj, bi, bj
        else:
            ti, tj, si, sj = bi, bj, ai, aj
        if 0 <= ti < h and 0 <= tj < w:
            out[ti, tj] = value(si, sj)

    for i in range(h + 1):  # horizontal cracks, row-major
        for j in range(w):
            maybe_flip(i - 1, j, i, j)
    for i in range(h):  # vertical cracks
        for j in range(w + 1):
            maybe_flip(i, j - 1, i, j)
    return GridMask(out)


def count_boundary_edges(mask: GridMask) -> int:
    """Number of cracks between differing pixels, frame border included."""
    pix = mask.pixels
    padded = np.zeros((pix.shape[0] + 2, pix.shape[1] + 2), dtype=bool)
    padded[1:-1, 1:-1] = pix
    horiz = padded[1:, :] != padded[:-1, :]
    vert = padded[:, 1:] != padded[:, :-1]
    return int(horiz.sum() + vert.sum())


# alignment states in lexicographic preference order
_GOOD, _WRONG, _INSERT = 0, 1, 2


def align_strings(x: DccString, y: DccString, params: TransitionParams) -> BurstAnnotation:
    """Most likely channel traversal explaining ``y`` as a corruption of ``x``.

    Scored with the exact likelihood; ties prefer fewer bursts, then the
    lexicographically smallest state sequence. Raises when no traversal
    exists (in particular whenever ``y`` is shorter than ``x``).
    """
    a, b = x.rel, y.rel
    na, nb = len(a), len(b)
    if nb < na:
        raise AlignmentInfeasibleError(
            f"observation has {nb} symbols but truth has {na}; bursts never shorten"
        )
    p, q1, q2 = params.p, params.q1, params.q2
    c_stay0 = -math.log(1 - p)
    c_enter1 = -math.log(p)
    c_stay1 = -math.log(1 - q1)
    c_exit1 = -math.log(q1)
    c_stay2 = -math.log(1 - q2)
    c_exit2 = -math.log(q2)
    inf = (math.inf, math.inf)

    # best[(i, j, state)] = (cost, bursts) to finish from i truth / j observed
    # symbols consumed; computed backward so a forward walk can break ties
    # toward the smallest state sequence.
    best: dict[tuple[int, int, int], tuple[float, float]] = {(na, nb, _GOOD): (0.0, 0.0)}

    def get(i, j, s):
        return best.get((i, j, s), inf)

    def options(i, j, s):
        """Successor moves as (cost, bursts, next_state, ni, nj)."""
        opts = []
        if s == _GOOD:
            if i < na and j < nb:
                if a[i] == b[j]:
                    opts.append((c_stay0, 0, _GOOD, i + 1, j + 1))
                else:
                    opts.append((c_enter1, 1, _WRONG, i + 1, j + 1))
        elif s == _WRONG:
            opts.append((c_exit1, 0, _INSERT, i, j))
            if i < na and j < nb and a[i] != b[j]:
                opts.append((c_stay1, 0, _WRONG, i + 1, j + 1))
        else:
            opts.append((c_exit2, 0, _GOOD, i, j))
            if j < nb:
                opts.append((c_stay2, 0, _INSERT, i, j + 1))
        return opts

    # evaluation order: (i + j) descending resolves consuming moves; within
    # a cell, state 2 depends on 0, state 1 on 2, so compute 0, 2, 1.
    for total in range(na + nb, -1, -1):
        for i in range(min(na, total), -1, -1):
            j = total - i
            if j < 0 or j > nb:
                continue
            for s in (_GOOD, _INSERT, _WRONG):
                if (i, j, s) in best:
                    continue
                cands = []
                for cost, k, ns, ni, nj in options(i, j, s):
                    c, kk = get(ni, nj, ns)
                    if c < math.inf:
                        cands.append((cost + c, k + kk))
                if cands:
                    best[(i, j, s)] = min(cands)

    if get(0, 0, _GOOD) == inf:
        raise AlignmentInfeasibleError("no channel traversal explains the observation")

    # forward walk; among optimal successors pick the smallest next state
    good_runs = [0]
    wrong_runs: list[int] = []
    insert_runs: list[int] = []
    i = j = 0
    s = _GOOD
    while (i, j, s) != (na, nb, _GOOD):
        here = get(i, j, s)
        for cost, k, ns, ni, nj in sorted(options(i, j, s), key=lambda o: o[2]):
            c, kk = get(ni, nj, ns)
            if c < math.inf and (cost + c, k + kk) == here:
                if s == _GOOD and ns == _GOOD:
                    good_runs[-1] += 1
                elif s == _GOOD and ns == _WRONG:
                    wrong_runs.append(1)
                elif s == _WRONG and ns == _WRONG:
                    wrong_runs[-1] += 1
                elif s == _WRONG and ns == _INSERT:
                    insert_runs.append(1)
                elif s == _INSERT and ns == _INSERT:
                    insert_runs[-1] += 1
                else:  # state 2 back to state 0
                    good_runs.append(1)
                i, j, s = ni, nj, ns
                break
        else:
            raise AssertionError("traceback lost the optimal path")
    return BurstAnnotation(tuple(good_runs), tuple(wrong_runs), tuple(insert_runs))


def estimate_from_annotations(annotations: Iterable[BurstAnnotation]) -> TransitionParams:
    """Transition frequencies pooled over annotations, clamped away from 0/1."""
    k = gamma = lam = delta = 0
    for ann in annotations:
        k += ann.events
        gamma += ann.good_total
        lam += ann.wrong_total
        delta += ann.state2_total

    def ratio(num, den, name):
        if den == 0:
            warnings.warn(f"no transitions leaving state for {name}; using floor")
            return PARAM_FLOOR
        v = num / den
        if not PARAM_FLOOR <= v <= 1 - PARAM_FLOOR:
            warnings.warn(f"{name} estimate {v} clamped to ({PARAM_FLOOR}, {1-PARAM_FLOOR})")
        return min(max(v, PARAM_FLOOR), 1 - PARAM_FLOOR)

    return TransitionParams(ratio(k, gamma, "p"), ratio(k, lam, "q1"), ratio(k, delta, "q2"))


def estimate_from_pairs(
    pairs: Iterable[tuple[DccString, DccString]],
    align_params: TransitionParams | None = None,
) -> TransitionParams:
    """Estimate transition probabilities from (truth, observed) pairs by
    aligning each pair and counting state transitions."""
    if align_params is None:
        align_params = TransitionParams(0.1, 0.5, 0.5)
    anns = [align_strings(x, y, align_params) for x, y in pairs]
    if not anns:
        raise ValueError("need at least one pair")
    return estimate_from_annotations(anns)


def estimate_alternating(
    ys: Sequence[DccString],
    init: TransitionParams,
    tol: float = 1e-3,
    max_iter: int = 20,
    denoiser: Callable[[DccString, TransitionParams], DccString] | None = None,
) -> TransitionParams:
    """Estimate parameters without ground truth: denoise with the current
    parameters, re-estimate against the denoised strings, repeat until the
    largest parameter change drops below ``tol``."""
    if denoiser is None:
        raise ValueError("a denoiser callable is required")
    params = init
    for _ in range(max_iter):
        cleaned = [denoiser(y, params) for y in ys]
        new = estimate_from_pairs(zip(cleaned, ys), align_params=params)
        change = max(abs(new.p - params.p), abs(new.q1 - params.q1), abs(new.q2 - params.q2))
        params = new
        if change < tol:
            return params
    warnings.warn(f"alternating estimation did not converge in {max_iter} iterations")
    return params


@dataclass(frozen=True)
class IidParams:
    """Coin-toss baseline: per-symbol error probability and the Poisson
    mean of the per-error length increase."""

    p_err: float
    mean_increase: float

    def __post_init__(self):
        if not 0.0 < self.p_err < 1.0:
            raise ValueError("p_err must lie in (0, 1)")
        if self.mean_increase < 0.0:
            raise ValueError("mean_increase must be nonnegative")

    def to_text(self) -> str:
        return f"pprime={self.p_err!r} lambdaprime={self.mean_increase!r}\n"

    @classmethod
    def from_text(cls, text: str) -> "IidParams":
        fields = _parse_kv(text)
        try:
            return cls(float(fields["pprime"]), float(fields["lambdaprime"]))
        except KeyError as exc:
            raise ValueError(f"missing parameter {exc}") from None


def estimate_iid_from_annotations(
    annotations: Iterable[BurstAnnotation], total_symbols: int
) -> IidParams:
    lam = delta_prime = 0
    for ann in annotations:
        lam += ann.wrong_total
        delta_prime += ann.length_increase
    if lam == 0:
        return IidParams(PARAM_FLOOR, 0.0)
    p_err = min(max(lam / total_symbols, PARAM_FLOOR), 1 - PARAM_FLOOR)
    return IidParams(p_err, delta_prime / lam)


def iid_neg_log_likelihood(
    x: DccString, y: DccString, ann: BurstAnnotation, params: IidParams
) -> float:
    """Negative log likelihood of the observation under the iid baseline.

    Every truth symbol is an independent coin toss; each erred symbol draws
    a Poisson length increase. The per-burst increase is attributed to the
    first erred symbol of the burst, the rest get zero.
    """
    n = len(x.rel)
    errs = ann.wrong_total
    if ann.length_increase != len(y.rel) - len(x.rel):
        raise ValueError("annotation does not match the pair lengths")
    nll = -(n - errs) * math.log(1 - params.p_err) - errs * math.log(params.p_err)
    for wrong, s2 in zip(ann.state1_visits, ann.state2_visits):
        increases = [s2 - 1] + [0] * (wrong - 1)
        for d in increases:
            nll -= _poisson_log_pmf(d, params.mean_increase)
    return nll


def _poisson_log_pmf(k: int, lam: float) -> float:
    if lam == 0.0:
        return 0.0 if k == 0 else -math.inf
    return k * math.log(lam) - lam - math.lgamma(k + 1)


def aic(k: int, neg_log_likelihood: float) -> float:
    """Akaike information criterion for a k-parameter model."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return 2.0 * k + 2.0 * neg_log_likelihood


def relative_likelihood(aic_a: float, aic_b: float) -> float:
    """exp((aic_a - aic_b) / 2): how probable model b is relative to a."""
    return math.exp((aic_a - aic_b) / 2.0)


def _parse_kv(text: str) -> dict[str, str]:
    fields = {}
    for tok in text.split():
        if "=" not in tok:
            raise ValueError(f"expected key=value, got {tok!r}")
        key, _, val = tok.partition("=")
        fields[key.strip().lower()] = val.strip()
    return fields
