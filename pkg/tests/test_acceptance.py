"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Criteria 9 and 10 share one rate-distortion sweep over a synthetic mask
corpus (see the module fixture); the sweep matches curves on total encoded
payload bits and scores distortion against the clean pre-corruption
contours.
"""

import bisect
import math
import time
from dataclasses import replace
from itertools import product

import numpy as np
import pytest

from jdcc import (
    BurstCosts,
    DccString,
    Direction,
    GridBounds,
    ObjectiveConfig,
    TransitionParams,
    aic,
    brute_force,
    build_tree,
    build_tst,
    corrupt_mask,
    corrupt_string,
    distortion,
    encode,
    decode,
    estimate_alternating,
    estimate_from_annotations,
    estimate_from_pairs,
    estimate_iid_from_annotations,
    estimate_rate,
    iid_neg_log_likelihood,
    joint_denoise,
    neg_log_likelihood_approx,
    neg_log_likelihood_exact,
    ppm_probability,
    realize,
    shape_frames,
    straightness,
    trace_contours,
    truncate_history,
)
from test_optimize import random_contour, random_params

E = Direction.E


def report(num, ok, detail):
    print(f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


def test_criterion_01_straightness_goldens():
    """Golden straightness values for three four-symbol windows.

    The pinned constants 4*sqrt(5)/5 and 6*sqrt(13)/13 correspond to
    corner paths with leg lengths (2,4) and (2,3). No four-symbol turn
    string realizes either value: a four-step window reaches chords whose
    point-to-chord distances are |integer cross| / |chord| for chords of
    length sqrt(2), 2, sqrt(10), 2*sqrt(2) or 4, and both constants demand
    a non-integer cross product on every one of them. The checks are kept
    as stated rather than adjusted to what the implementation (or any
    turn-based realization) can produce, so two of them fail.
    """
    t0 = time.time()
    goldens = {
        "rrls": 4 * math.sqrt(5) / 5,
        "lrlr": 6 * math.sqrt(13) / 13,
        "ssss": 0.0,
    }
    failures = []
    for w, want in goldens.items():
        got = straightness(w)
        status = "ok" if abs(got - want) <= 1e-12 else f"got {got:.12f}"
        print(f"    s({w}): expected {want:.12f}, {status}")
        if abs(got - want) > 1e-12:
            failures.append(w)
    elapsed = time.time() - t0
    report(
        1,
        not failures and elapsed < 1.0,
        f"{3 - len(failures)}/3 golden values matched in {elapsed:.2f}s"
        + (f"; unmatched: {failures}" if failures else ""),
    )


def _random_small_instances(count, seed):
    rng = np.random.default_rng(seed)
    bounds = GridBounds(0, 12, 0, 12)
    out = []
    while len(out) < count:
        train = random_contour(rng, int(rng.integers(4, 10)), bounds)
        tree = build_tree([train])  # at most 9 symbols: depth <= 2
        params = random_params(rng)
        cfg = ObjectiveConfig.create(
            tree,
            params,
            rate_weight=float(rng.uniform(0, 2)),
            prior_weight=float(rng.uniform(0, 4)),
            prior_span=4,
            bounds=bounds,
        )
        y = random_contour(rng, int(rng.integers(3, 9)), bounds)
        if len(y) <= max(tree.depth, 1):
            continue
        out.append((y, cfg))
    return out


def test_criterion_02_dp_matches_brute_force():
    t0 = time.time()
    instances = _random_small_instances(120, seed=202)
    worst = 0.0
    for y, cfg in instances:
        a = joint_denoise(y, cfg).cost
        b = brute_force(y, cfg).cost
        worst = max(worst, abs(a - b))
    elapsed = time.time() - t0
    report(
        2,
        worst <= 1e-9 and elapsed < 60,
        f"{len(instances)} instances, worst cost gap {worst:.2e}, {elapsed:.1f}s",
    )


def test_criterion_03_suffix_tree_equivalence():
    t0 = time.time()
    instances = _random_small_instances(120, seed=303)
    worst = 0.0
    for y, cfg in instances:
        a = joint_denoise(y, cfg, use_suffix_truncation=True).cost
        b = joint_denoise(y, cfg, use_suffix_truncation=False).cost
        worst = max(worst, abs(a - b))
    # exhaustive history preservation at depth <= 3
    preserved = True
    for seed in (1, 2, 3):
        rng = np.random.default_rng(seed)
        rel = "".join(rng.choice(list("lsr"), size=int(rng.integers(10, 27))))
        tree = build_tree([DccString((0, 0), E, rel)])
        assert tree.depth <= 3
        tst = build_tst(tree)
        for hist in product("lsr", repeat=tree.depth):
            hist = list(hist)
            if ppm_probability(tree, truncate_history(tst, hist)) != ppm_probability(
                tree, hist
            ):
                preserved = False
    elapsed = time.time() - t0
    report(
        3,
        worst == 0.0 and preserved and elapsed < 60,
        f"cost gap {worst:.2e}, exhaustive history preservation {preserved}, {elapsed:.1f}s",
    )


def test_criterion_04_lossless_coding():
    t0 = time.time()
    rng = np.random.default_rng(404)
    train = [
        DccString((0, 0), E, "".join(rng.choice(list("lsr"), size=60))) for _ in range(6)
    ]
    tree = build_tree(train)
    contours = []
    for _ in range(1000):
        rel = "".join(rng.choice(list("lsr"), size=int(rng.integers(0, 40))))
        contours.append(
            DccString(
                (int(rng.integers(0, 500)), int(rng.integers(0, 500))),
                Direction(int(rng.integers(4))),
                rel,
                closed=bool(rng.integers(2)),
            )
        )
    bits = encode(contours, tree)
    lossless = decode(bits, tree) == contours
    ideal = sum(estimate_rate(tree, x, 1) for x in contours)
    bound = ideal + 32 * len(contours) + 64
    elapsed = time.time() - t0
    report(
        4,
        lossless and bits.payload_bits <= bound and elapsed < 30,
        f"round trip {lossless}, payload {bits.payload_bits} <= {bound:.0f} bits, {elapsed:.1f}s",
    )


def test_criterion_05_likelihood_identity():
    rng = np.random.default_rng(505)
    worst = 0.0
    for _ in range(1000):
        p, q1, q2 = rng.uniform(0.05, 0.95, 3)
        params = TransitionParams(float(p), float(q1), float(q2))
        costs = BurstCosts.from_params(params)
        x = DccString((0, 0), E, "".join(rng.choice(list("lsr"), size=60)))
        _, ann = corrupt_string(x, params, seed=int(rng.integers(1 << 30)))
        approx = neg_log_likelihood_approx(
            ann.events, ann.wrong_total, ann.length_increase, costs
        )
        exact = neg_log_likelihood_exact(ann, params)
        want = (ann.good_total - ann.events) * math.log(1 - params.p)
        worst = max(worst, abs(approx - exact - want))
    report(5, worst <= 1e-9, f"1000 annotations, worst identity gap {worst:.2e}")


def test_criterion_06_estimator_recovery_and_alternating():
    t0 = time.time()
    truth = TransitionParams(0.05, 0.5, 0.5)
    rng = np.random.default_rng(606)
    anns = []
    symbols = 0
    while symbols < 100_000:
        x = DccString((0, 0), E, "".join(rng.choice(list("lsr"), size=1000)))
        _, ann = corrupt_string(x, truth, seed=int(rng.integers(1 << 30)))
        anns.append(ann)
        symbols += 1000
    est = estimate_from_annotations(anns)
    recovery = max(
        abs(est.p - truth.p), abs(est.q1 - truth.q1), abs(est.q2 - truth.q2)
    )

    # alternating estimation without ground truth, two starting points
    train_all, noisy = [], []
    for kind, seed in (("rect", 13), ("rect", 3)):
        frames = shape_frames(kind, size=48, frames=3, seed=seed)
        for f in frames[:2]:
            train_all.extend(trace_contours(f))
        noisy.append(
            max(trace_contours(corrupt_mask(frames[2], 0.10, seed=77 + seed)), key=len)
        )
    tree = build_tree(train_all)
    bounds = GridBounds.for_frame(48, 48)

    def denoiser(y, params):
        cfg = ObjectiveConfig.create(
            tree, params, rate_weight=0.0, prior_weight=1.0, prior_span=4, bounds=bounds
        )
        return joint_denoise(y, cfg).contour

    tol = 1e-3
    fixed = []
    with pytest.warns(UserWarning):
        for init in (0.5, 0.8):
            fixed.append(
                estimate_alternating(
                    noisy,
                    TransitionParams(init, init, init),
                    tol=tol,
                    max_iter=20,
                    denoiser=denoiser,
                )
            )
    a, b = fixed
    spread = max(abs(a.p - b.p), abs(a.q1 - b.q1), abs(a.q2 - b.q2))
    elapsed = time.time() - t0
    report(
        6,
        recovery <= 0.01 and spread < 2 * tol and elapsed < 120,
        f"recovery gap {recovery:.4f} <= 0.01, fixed-point spread {spread:.2e} < {2*tol}, "
        f"{elapsed:.0f}s",
    )


def test_criterion_07_model_selection_direction():
    rng = np.random.default_rng(707)
    params = TransitionParams(0.08, 0.5, 0.5)
    wins = trials = 0
    for _ in range(40):
        xs, ys, anns = [], [], []
        for _ in range(12):
            x = DccString((0, 0), E, "".join(rng.choice(list("lsr"), size=150)))
            y, ann = corrupt_string(x, params, seed=int(rng.integers(1 << 30)))
            xs.append(x)
            ys.append(y)
            anns.append(ann)
        est = estimate_from_annotations(anns)
        iid = estimate_iid_from_annotations(anns, sum(len(x.rel) for x in xs))
        n = len(xs)
        nll_burst = sum(neg_log_likelihood_exact(a, est) for a in anns) / n
        nll_iid = (
            sum(iid_neg_log_likelihood(x, y, a, iid) for x, y, a in zip(xs, ys, anns)) / n
        )
        trials += 1
        if aic(3, nll_burst) < aic(2, nll_iid):
            wins += 1
    report(7, wins >= 0.95 * trials, f"burst model preferred in {wins}/{trials} corpora")


def test_criterion_08_denoising_direction():
    t0 = time.time()
    specs = [("rect", 64, 7), ("circle", 56, 11), ("rect", 56, 13), ("circle", 48, 5)]
    lines = []
    ok = True
    for delta in (0.10, 0.30):
        cases = []
        for kind, size, seed in specs:
            frames = shape_frames(kind, size=size, frames=3, seed=seed)
            train = []
            for f in frames[:2]:
                train.extend(trace_contours(f))
            clean = max(trace_contours(frames[2]), key=len)
            noisy = max(
                trace_contours(corrupt_mask(frames[2], delta, seed=9)), key=len
            )
            cases.append((kind, size, train, clean, noisy))
        pairs = [(c, n) for _, _, _, c, n in cases if len(n.rel) >= len(c.rel)]
        params = estimate_from_pairs(pairs)
        d_noisy = d_hat = 0.0
        for kind, size, train, clean, noisy in cases:
            tree = build_tree(train)
            cfg = ObjectiveConfig.create(
                tree,
                params,
                rate_weight=0.0,
                prior_weight=3.0,
                prior_span=4,
                bounds=GridBounds.for_frame(size, size),
            )
            sol = joint_denoise(noisy, cfg)
            d_noisy += distortion(noisy, clean)
            d_hat += distortion(sol.contour, clean)
        d_noisy /= len(cases)
        d_hat /= len(cases)
        lines.append(f"delta={delta:.0%}: mean {d_hat:.1f} vs noisy {d_noisy:.1f}")
        ok = ok and d_hat < d_noisy
    report(8, ok, "; ".join(lines) + f"; {time.time()-t0:.0f}s")


@pytest.fixture(scope="module")
def rd_sweep():
    """Joint and separate sweeps over the synthetic mask corpus.

    Rates are total encoded payload bits over the corpus; distortion is
    measured against the clean pre-corruption contours. The base
    smoothing weight sits where the unconstrained optimum keeps full-length
    contours, and the grid stays in that operating range.
    """
    specs = [("blob", 56, 2), ("blob", 56, 5), ("rect", 56, 13), ("blob", 56, 21)]
    data = []
    for kind, size, seed in specs:
        frames = shape_frames(kind, size=size, frames=3, seed=seed)
        train = []
        for f in frames[:2]:
            train.extend(trace_contours(f))
        clean = max(trace_contours(frames[2]), key=len)
        noisy = max(trace_contours(corrupt_mask(frames[2], 0.10, seed=9)), key=len)
        data.append((size, train, clean, noisy))
    pairs = [(c, n) for _, _, c, n in data if len(n.rel) >= len(c.rel)]
    params = estimate_from_pairs(pairs)
    tree = build_tree([c for _, tr, _, _ in data for c in tr])

    def solve(lam, beta):
        total_bits = 0
        model_bits = dist = 0.0
        for size, _, clean, noisy in data:
            cfg = ObjectiveConfig.create(
                tree,
                params,
                rate_weight=lam,
                prior_weight=beta,
                prior_span=4,
                bounds=GridBounds.for_frame(size, size),
            )
            sol = joint_denoise(noisy, cfg)
            total_bits += encode([sol.contour], tree).payload_bits
            model_bits += sol.rate_bits
            dist += distortion(sol.contour, clean)
        return total_bits, model_bits, dist

    joint = [(lam,) + solve(lam, 1.0) for lam in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)]
    separate = [(beta,) + solve(0.0, beta) for beta in (1.0, 2.0, 4.0, 8.0, 16.0)]
    return joint, separate


def test_criterion_09_rd_dominance(rd_sweep):
    """Joint must weakly dominate separate at matched bit budgets.

    The dominance direction is an empirical claim about a particular data
    regime, not a theorem about these curves: the underlying objective can
    legitimately shorten estimates under budget pressure, and the one-way
    distortion metric scores short estimates mildly. On desk-scale corpora
    the two schemes land within a few distortion units of each other, so
    this check records whichever way the comparison falls.
    """
    joint, separate = rd_sweep
    jpts = sorted((b, d) for _, b, _, d in joint)

    def joint_at(bits):
        rates = [b for b, _ in jpts]
        i = bisect.bisect_left(rates, bits)
        if i < len(rates) and rates[i] == bits:
            return jpts[i][1]
        (b0, d0), (b1, d1) = jpts[i - 1], jpts[i]
        t = (bits - b0) / (b1 - b0)
        return d0 + t * (d1 - d0)

    matched = 0
    dominated = True
    strict = False
    details = []
    for beta, bits, _, d in separate:
        if jpts[0][0] <= bits <= jpts[-1][0]:
            matched += 1
            jd = joint_at(bits)
            details.append(f"{bits}b: joint {jd:.1f} vs separate {d:.1f}")
            if jd > d + 1e-9:
                dominated = False
            if jd < d - 1e-9:
                strict = True
    report(
        9,
        matched > 0 and dominated and strict,
        f"{matched} matched budgets; " + "; ".join(details),
    )


def test_criterion_10_rd_monotonicity(rd_sweep):
    joint, _ = rd_sweep
    rates = [m for _, _, m, _ in joint]
    dists = [d for _, _, _, d in joint]
    rate_ok = all(b <= a + 1e-9 for a, b in zip(rates, rates[1:]))
    dist_ok = all(b >= a - 1e-9 for a, b in zip(dists, dists[1:]))
    report(
        10,
        rate_ok and dist_ok,
        f"model rate {rates[0]:.1f}->{rates[-1]:.1f} non-increasing {rate_ok}; "
        f"distortion {dists[0]:.1f}->{dists[-1]:.1f} non-decreasing {dist_ok}",
    )
