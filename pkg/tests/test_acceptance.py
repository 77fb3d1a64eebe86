"""Acceptance criteria 1-9.  Each test prints exactly one PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest

import oracles
from qkdsec.distributions import ClassicalAtoms, bsc_joint, JointDistribution
from qkdsec.entropy import (
    collision_entropy_rel,
    max_entropy_rel,
    min_entropy_rel,
    smooth_max_entropy_classical,
    smooth_min_entropy_classical,
)
from qkdsec.finitekey import (
    FiniteKeyParams,
    aep_delta,
    finite_key_length,
    leak_ir_bound,
    security_deltas,
)
from qkdsec.keyrate import (
    AD_LIMIT,
    ProtocolParams,
    ad_threshold_limit,
    asymptotic_ad_criterion,
    entropy_x_given_e,
    entropy_x_given_y,
    find_threshold,
    rate,
)
from qkdsec.operators import (
    HermitianOperator,
    partial_trace,
    permute_factors,
    scalar,
    support_projector,
    tensor,
)
from qkdsec.postproc import (
    PipelineConfig,
    ReconciliationAbort,
    advantage_distill,
    ball_radius,
    generator,
    hash_length,
    ir_hash_decode,
    ir_hash_encode,
    pa_distance_exhaustive,
    report_json,
    run_pipeline,
    sample_bsc_pair,
)

TOL = 1e-9


@pytest.fixture
def verdict(capsys):
    def report(number, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail
    return report


def timed(fn):
    start = time.perf_counter()
    value = fn()
    return value, time.perf_counter() - start


# ---------------------------------------------------------------------------


def test_criterion_1_six_state_threshold(verdict):
    t, secs = timed(lambda: find_threshold("six-state"))
    ok = abs(t - 0.1260) <= 0.0005 and secs < 1
    verdict(1, ok, f"threshold={t:.5f} (target 0.1260 +- 0.0005) time={secs:.2f}s (< 1 s)")


def test_criterion_2_six_state_preprocessing(verdict):
    t, secs = timed(lambda: find_threshold("six-state", optimize_q=True))
    ok = abs(t - 0.141) <= 0.001 and secs < 10
    verdict(2, ok, f"threshold={t:.5f} (target 0.141 +- 0.001) time={secs:.2f}s (< 10 s)")


def test_criterion_3_bb84_thresholds(verdict):
    def both():
        return find_threshold("bb84"), find_threshold("bb84", optimize_q=True)
    (t1, t2), secs = timed(both)
    ok = abs(t1 - 0.110) <= 0.001 and abs(t2 - 0.124) <= 0.001 and secs < 30
    verdict(3, ok, f"one-way={t1:.5f} (0.110 +- 0.001) preprocessed={t2:.5f} (0.124 +- 0.001) "
                   f"time={secs:.2f}s (< 30 s)")


def test_criterion_4_ad_limit(verdict):
    target = 0.5 - math.sqrt(5) / 10
    res, secs = timed(lambda: ad_threshold_limit(200))
    # the criterion flips sign across the limit for large b
    below = asymptotic_ad_criterion(target - 0.005, 200).positive
    above = any(asymptotic_ad_criterion(target + 0.005, b).positive for b in range(1, 201))
    ok = (abs(res["extrapolated"] - target) <= 1e-4 and abs(res["analytic"] - target) <= 1e-4
          and abs(AD_LIMIT - target) <= 1e-4 and below and not above and secs < 5)
    verdict(4, ok, f"b-scan(200) extrapolated={res['extrapolated']:.6f} at_b=200:{res['at_b_max']:.6f} "
                   f"analytic={res['analytic']:.6f} (target {target:.6f} +- 1e-4) time={secs:.2f}s (< 5 s)")


def _pa_instances():
    rng = np.random.default_rng(20240505)
    for nx in (2, 3, 4, 8, 16, 32, 64):
        for ne in (1, 2, 3, 4):
            for l in range(1, 7):
                yield rng.dirichlet(np.ones(nx * ne)).reshape(nx, ne), l
                # peaked and sparse instances
                w = rng.dirichlet(np.full(nx * ne, 0.1)).reshape(nx, ne)
                yield w, l
                w = np.zeros((nx, ne))
                w[np.arange(nx), rng.integers(0, ne, nx)] = rng.random(nx)
                yield w / w.sum(), l
                # subnormalized
                yield 0.7 * rng.dirichlet(np.ones(nx * ne)).reshape(nx, ne), l


def test_criterion_5_privacy_amplification(verdict):
    def run():
        count = violations = 0
        worst = -math.inf
        for w, l in _pa_instances():
            res = pa_distance_exhaustive(JointDistribution.from_array(w), l)
            count += 1
            worst = max(worst, res.avg_distance - res.bound)
            violations += res.avg_distance > res.bound + 1e-10
        return count, violations, worst
    (count, violations, worst), secs = timed(run)
    ok = violations == 0 and secs < 120
    verdict(5, ok, f"instances={count} violations={violations} max(avg-bound)={worst:.3e} "
                   f"time={secs:.1f}s (< 120 s)")


# ---------------------------------------------------------------------------
# criterion 6: entropy calculus on random instances


def _rho(d, rng, dims, trace=None, low_rank=True):
    rank = int(rng.integers(1, d + 1)) if low_rank else d
    t = rng.uniform(0.2, 1.0) if trace is None else trace
    return HermitianOperator(oracles.random_density(d, rng, rank=rank, trace=t), dims)


def _sigma(d, rng, dims=None):
    return HermitianOperator(oracles.random_density(d, rng), dims)


def _check_min_max(rng):
    da, db = [(2, 2), (2, 4), (4, 2), (8, 1)][rng.integers(4)]
    rho = _rho(da * db, rng, (da, db))
    sigma = _sigma(db, rng, (db,))
    return min_entropy_rel(rho, sigma) + math.log2(rho.trace) - max_entropy_rel(rho, sigma)


def _check_additivity(rng):
    if rng.integers(2):
        r1, s1 = _rho(4, rng, (2, 2)), _sigma(2, rng, (2,))
        r2, s2 = _rho(2, rng, (2,)), scalar()
    else:
        r1, s1 = _rho(2, rng, (2,)), scalar()
        r2, s2 = _rho(4, rng, (2, 2)), _sigma(2, rng, (2,))
    joint = tensor(r1, r2)
    k1, k2 = len(r1.dims) - len(s1.dims), len(r2.dims) - len(s2.dims)
    n1 = len(r1.dims)
    order = list(range(k1)) + [n1 + i for i in range(k2)] + list(range(k1, n1)) + \
        [n1 + i for i in range(k2, len(r2.dims))]
    joint = permute_factors(joint, order)
    sig = tensor(*[s for s in (s1, s2) if s.dims]) if (s1.dims or s2.dims) else scalar()
    dmin = min_entropy_rel(joint, sig) - min_entropy_rel(r1, s1) - min_entropy_rel(r2, s2)
    dmax = max_entropy_rel(joint, sig) - max_entropy_rel(r1, s1) - max_entropy_rel(r2, s2)
    return max(abs(dmin), abs(dmax))


def _check_subadditivity(rng):
    rho = _rho(8, rng, (2, 2, 2))
    s_bc = _sigma(4, rng, (2, 2))
    rho_ab = partial_trace(rho, [0, 1])
    s_b = partial_trace(s_bc, [0])
    a = min_entropy_rel(rho, s_bc) - min_entropy_rel(rho_ab, s_b)
    b = max_entropy_rel(rho, s_bc) - max_entropy_rel(rho_ab, s_b)
    return max(a, b)


def _check_chain(rng):
    rho = _rho(8, rng, (2, 2, 2))
    if rng.integers(2):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        v /= np.linalg.norm(v)
        proj = np.kron(np.kron(np.eye(2), np.outer(v, v.conj())), np.eye(2))
        rho = HermitianOperator(proj @ rho.matrix @ proj, (2, 2, 2))
    rho_b = partial_trace(rho, [1])
    pi = support_projector(rho_b, 1e-10)
    r = round(pi.trace)
    s_b = pi.scale(1 / r)
    s_c = _sigma(2, rng, (2,))
    lhs = min_entropy_rel(rho, s_c)
    rhs = min_entropy_rel(rho, tensor(s_b, s_c)) + max_entropy_rel(rho_b, scalar())
    assert abs(max_entropy_rel(rho_b, scalar()) - math.log2(r)) < TOL
    return abs(lhs - rhs)


def _cq(blocks, dims):
    d = blocks[0].shape[0]
    z = len(blocks)
    m = np.zeros((d * z, d * z), dtype=complex)
    for i, blk in enumerate(blocks):
        # register Z is the trailing factor
        m[i::z, i::z] = blk
    return HermitianOperator(m, dims)


def _check_cq_min(rng):
    rhos = [oracles.random_density(4, rng, rank=int(rng.integers(1, 5)), trace=rng.uniform(0.1, 0.5))
            for _ in range(2)]
    sigmas = [oracles.random_density(2, rng, trace=rng.uniform(0.2, 1)) for _ in range(2)]
    rho = _cq(rhos, (2, 2, 2))
    sigma = _cq(sigmas, (2, 2))
    per = [min_entropy_rel(HermitianOperator(r, (2, 2)), HermitianOperator(s, (2,)))
           for r, s in zip(rhos, sigmas)]
    return abs(min_entropy_rel(rho, sigma) - min(per))


def _check_classical_x(rng):
    parts = [oracles.random_density(4, rng, rank=int(rng.integers(1, 5)), trace=rng.uniform(0.1, 0.5))
             for _ in range(2)]
    m = np.zeros((8, 8), dtype=complex)
    m[:4, :4], m[4:, 4:] = parts
    rho = HermitianOperator(m, (2, 2, 2))
    rho_bc = HermitianOperator(parts[0] + parts[1], (2, 2))
    s_c = _sigma(2, rng, (2,))
    return min_entropy_rel(rho_bc, s_c) - min_entropy_rel(rho, s_c)


def _check_markov_chain(rng):
    p = rng.dirichlet(np.ones(2))
    ra = [oracles.random_density(2, rng, rank=int(rng.integers(1, 3))) for _ in range(2)]
    rc = [oracles.random_density(2, rng, rank=int(rng.integers(1, 3))) for _ in range(2)]
    ket = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
    rho = HermitianOperator(sum(p[y] * oracles.kron(oracles.kron(ra[y], ket[y]), rc[y]) for y in range(2)),
                            (2, 2, 2))
    rho_yc = HermitianOperator(sum(p[y] * oracles.kron(ket[y], rc[y]) for y in range(2)), (2, 2))
    rho_ay = partial_trace(rho, [0, 1])
    rho_y = partial_trace(rho, [1])
    s_c = _sigma(2, rng, (2,))
    lhs = min_entropy_rel(rho, s_c)
    rhs = min_entropy_rel(rho_yc, s_c) + min_entropy_rel(rho_ay, rho_y)
    return rhs - lhs


def _check_min_collision(rng):
    da, db = [(2, 2), (2, 4), (4, 2), (8, 1)][rng.integers(4)]
    rho = _rho(da * db, rng, (da, db), low_rank=False)
    sigma = _sigma(db, rng, (db,))
    return min_entropy_rel(rho, sigma) - collision_entropy_rel(rho, sigma)


ENTROPY_CHECKS = {
    "min<=max": _check_min_max,
    "additivity": _check_additivity,
    "strong-subadditivity": _check_subadditivity,
    "chain-equality": _check_chain,
    "classical-register-min": _check_cq_min,
    "classical-x-nonnegative": _check_classical_x,
    "markov-chain": _check_markov_chain,
    "min<=collision": _check_min_collision,
}


def test_criterion_6_entropy_calculus(verdict):
    def run():
        out = {}
        for index, (name, check) in enumerate(ENTROPY_CHECKS.items()):
            rng = np.random.default_rng(600 + index)
            worst = max(check(rng) for _ in range(1000))
            out[name] = worst
        return out
    worst, secs = timed(run)
    ok = all(v <= TOL for v in worst.values()) and secs < 120
    summary = " ".join(f"{k}:{v:.1e}" for k, v in worst.items())
    verdict(6, ok, f"1000 instances each, worst violation {summary} (<= 1e-9) time={secs:.1f}s (< 120 s)")


# ---------------------------------------------------------------------------


def test_criterion_7_classical_aep(verdict):
    n, eps, e = 10 ** 4, 1e-3, 0.1

    def run():
        atoms = ClassicalAtoms.from_distribution(bsc_joint(e)).power(n)
        return (smooth_min_entropy_classical(atoms, eps=eps) / n,
                smooth_max_entropy_classical(atoms, eps=eps) / n)
    (hmin, hmax), secs = timed(run)
    h = oracles.h(e)
    d = aep_delta(n, 2, eps)
    ok = hmin >= h - d and hmax <= h + d and secs < 60
    verdict(7, ok, f"Hmin/n={hmin:.5f} >= {h - d:.5f}, Hmax/n={hmax:.5f} <= {h + d:.5f} "
                   f"(h={h:.5f}, delta={d:.5f}) time={secs:.1f}s (< 60 s)")


def test_criterion_8_simulator(verdict):
    def run():
        e, b, blocks = 0.05, 3, 10 ** 5
        x, y = sample_bsc_pair(blocks * b, e, seed=8)
        _, _, stats = advantage_distill(x.bits, y.bits, b, generator(8, "ad"))
        p = (1 - e) ** b + e ** b
        err = e ** b / p
        acc_ok = abs(stats.accept_rate - 0.857500) <= 3 * math.sqrt(p * (1 - p) / blocks)
        err_ok = abs(stats.error_rate - 1.458e-4) <= 3 * math.sqrt(err * (1 - err) / stats.accepted)

        n, eps, trials = 20, 1e-2, 10 ** 4
        t = ball_radius(n, 0.1, eps / 2)
        k = hash_length(n, t, eps)
        src, rng = generator(9, "source"), generator(9, "ir")
        failures = 0
        for _ in range(trials):
            xs, ys = sample_bsc_pair(n, 0.1, 0, rng=src)
            tr = ir_hash_encode(xs, k, 0, rng=rng)
            try:
                failures += ir_hash_decode(ys, tr, t, rng=rng) != xs
            except ReconciliationAbort:
                failures += 1
        ir_ok = failures / trials <= eps

        cfg = PipelineConfig(3000, 0.05, 3, "repetition", ell=50, seed=7)
        first, second = report_json(run_pipeline(cfg)), report_json(run_pipeline(cfg))
        rep = json.loads(first)
        same = first == second and rep["status"] == "ok" and rep["ell_admissible"] >= 50
        return stats, acc_ok, err_ok, failures / trials, ir_ok, same, (t, k, eps)
    (stats, acc_ok, err_ok, fail, ir_ok, same, (t, k, eps)), secs = timed(run)
    ok = acc_ok and err_ok and ir_ok and same and secs < 60
    verdict(8, ok, f"AD accept={stats.accept_rate:.6f} error={stats.error_rate:.3e} "
                   f"hash-IR(t={t},k={k}) failure={fail:.1e} <= eps={eps:g} "
                   f"pipeline seed 7 identical={same} time={secs:.1f}s (< 60 s)")


def test_criterion_9_finite_key(verdict):
    def run():
        res = rate(ProtocolParams("six-state", 0.05))
        lam = res.lambdas_used.as_array()
        p = FiniteKeyParams.scheduled(10 ** 12, eps=1e-9)
        delta = security_deltas(p).delta
        leak = leak_ir_bound(p.n, entropy_x_given_y(lam), p.eps)
        ell = finite_key_length(p, entropy_x_given_e(lam), leak)
        return ell / p.N, res.rate, delta
    (finite, asym, delta), secs = timed(run)
    gap = abs(finite - (asym - delta))
    ok = gap <= 0.01 and secs < 1
    verdict(9, ok, f"l/N={finite:.5f} vs rate-delta={asym - delta:.5f} (rate={asym:.5f}, delta={delta:.5f}) "
                   f"gap={gap:.2e} (<= 0.01) time={secs:.2f}s (< 1 s)")
