import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom

from qkdsec.distributions import JointDistribution
from qkdsec.keyrate import ad_transform
from qkdsec.postproc import (
    BitString,
    ExtendedHammingCode,
    HashFunction,
    L1Region,
    PipelineConfig,
    PipelineWarning,
    ReconciliationAbort,
    RepetitionCode,
    advantage_distill,
    advantage_distill_block,
    apply_hash,
    ball_radius,
    ball_size,
    generator,
    hash_failure_bound,
    ir_code_decode,
    ir_code_encode,
    ir_hash_decode,
    ir_hash_encode,
    pa_distance_exhaustive,
    parameter_estimate,
    privacy_amplify,
    report_json,
    run_pipeline,
    sample_bsc_pair,
    sample_hash,
)


def dense_toeplitz(seed, n, l):
    t = np.zeros((l, n), dtype=np.int64)
    for i in range(l):
        for j in range(n):
            t[i, j] = seed[i - j + n - 1]
    return t


def all_seeds(length):
    return ((np.arange(2 ** length)[:, None] >> np.arange(length)) & 1).astype(np.uint8)


# ---------------------------------------------------------------------------
# bits and streams


def test_bitstring_basics():
    b = BitString.from_str("1011")
    assert len(b) == 4 and b.weight == 3 and str(b) == "1011"
    assert (b ^ BitString.from_str("1111")) == BitString.from_str("0100")
    assert BitString.from_str("10000000").hex() == "80"
    with pytest.raises(ValueError):
        BitString([0, 2])


def test_stage_streams_independent_and_replayable():
    a = generator(3, "ir").integers(0, 2 ** 32, 4)
    b = generator(3, "ir").integers(0, 2 ** 32, 4)
    c = generator(3, "pa").integers(0, 2 ** 32, 4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_bsc_sampling_rate():
    x, y = sample_bsc_pair(10 ** 5, 0.1, seed=1)
    flips = (x ^ y).weight
    sigma = math.sqrt(10 ** 5 * 0.1 * 0.9)
    assert abs(flips - 10 ** 4) < 4 * sigma
    x, y = sample_bsc_pair(1000, 0.0, seed=2)
    assert x == y


# ---------------------------------------------------------------------------
# hashing


@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 2 ** 32))
@settings(max_examples=60, deadline=None)
def test_toeplitz_matches_dense_matrix(n, l, seed):
    rng = np.random.default_rng(seed)
    s = rng.integers(0, 2, n + l - 1)
    x = rng.integers(0, 2, n)
    f = HashFunction(s, n, l)
    expected = dense_toeplitz(s, n, l) @ x % 2
    assert np.array_equal(f.apply_bits(x), expected)
    assert np.array_equal(f.matrix(), dense_toeplitz(s, n, l))


def test_toeplitz_fft_path_matches_dense():
    rng = np.random.default_rng(0)
    n, l = 2000, 600
    f = HashFunction(rng.integers(0, 2, n + l - 1), n, l)
    x = rng.integers(0, 2, n)
    assert np.array_equal(f.apply_bits(x), dense_toeplitz(f.seed, n, l) @ x % 2)


def test_hash_of_zero_and_length_checks():
    f = sample_hash(16, 5, seed=4)
    assert apply_hash(f, BitString.zeros(16)) == BitString.zeros(5)
    assert privacy_amplify(BitString.zeros(16), f) == BitString.zeros(5)
    with pytest.raises(ValueError):
        sample_hash(4, 5, seed=0)
    with pytest.raises(ValueError):
        privacy_amplify(BitString.zeros(15), f)


def test_identity_diagonal_seed():
    # seed with a single one at position n-1 gives the identity matrix
    n = 12
    s = np.zeros(2 * n - 1, dtype=np.uint8)
    s[n - 1] = 1
    f = HashFunction(s, n, n)
    x = BitString(np.random.default_rng(1).integers(0, 2, n))
    assert f(x) == x


def test_collisions_n8_l3():
    n, l = 8, 3
    seeds = all_seeds(n + l - 1)
    mats = np.stack([dense_toeplitz(s, n, l) for s in seeds])
    xs = all_seeds(n).astype(np.int64)
    images = np.einsum("sij,xj->sxi", mats, xs) % 2
    codes = images @ (1 << np.arange(l))
    worst = 0.0
    for a, b in itertools.combinations(range(2 ** n), 2):
        worst = max(worst, float(np.mean(codes[:, a] == codes[:, b])))
    assert worst <= 2 ** -l + 1e-12


@pytest.mark.parametrize("n", range(1, 11))
def test_two_universal_exhaustive(n):
    # collisions of x and x' depend only on d = x xor x' by linearity
    diffs = all_seeds(n)[1:].astype(np.int64)
    for l in range(1, min(n, 3) + 1):
        seeds = all_seeds(n + l - 1)
        mats = np.stack([HashFunction(s, n, l).matrix() for s in seeds]).astype(np.int64)
        images = np.einsum("sij,dj->sdi", mats, diffs) % 2
        rate = np.mean(~images.any(axis=2), axis=0)
        assert rate.max() <= 2 ** -l + 1e-12


# ---------------------------------------------------------------------------
# privacy amplification


def test_pa_uniform_independent():
    k = 3
    w = np.full((2 ** k, 2), 1 / 2 ** (k + 1))
    res = pa_distance_exhaustive(JointDistribution.from_array(w), k)
    assert res.avg_distance <= res.bound + 1e-10
    # full-rank members map a uniform input to a uniform output
    seeds = all_seeds(2 * k - 1)
    for s, d in zip(seeds, res.distances):
        rank = np.linalg.matrix_rank(dense_toeplitz(s, k, k).astype(float))
        if rank == k and _gf2_rank(dense_toeplitz(s, k, k)) == k:
            assert d <= 1e-12


def _gf2_rank(m):
    m = m.copy() % 2
    rank = 0
    for c in range(m.shape[1]):
        piv = [r for r in range(rank, m.shape[0]) if m[r, c]]
        if not piv:
            continue
        m[[rank, piv[0]]] = m[[piv[0], rank]]
        for r in range(m.shape[0]):
            if r != rank and m[r, c]:
                m[r] ^= m[rank]
        rank += 1
    return rank


def test_pa_fully_known():
    w = np.diag([0.5, 0.5])
    res = pa_distance_exhaustive(JointDistribution.from_array(w), 1)
    assert res.bound >= 1
    assert res.avg_distance == pytest.approx(1.0, abs=1e-12)
    assert res.avg_distance <= res.bound + 1e-10


def test_pa_first_bit_known():
    w = np.zeros((16, 2))
    for x in range(16):
        w[x, x & 1] = 1 / 16
    res = pa_distance_exhaustive(JointDistribution.from_array(w), 2)
    assert res.collision_entropy == pytest.approx(3.0, abs=1e-12)
    assert res.bound == pytest.approx(2 ** -0.5, abs=1e-12)
    assert res.avg_distance <= res.bound + 1e-10


def test_pa_regime_enforced():
    with pytest.raises(ValueError):
        pa_distance_exhaustive(JointDistribution.from_array(np.full((2, 5), 0.1)), 1)
    with pytest.raises(ValueError):
        pa_distance_exhaustive(JointDistribution.from_array(np.full((2, 2), 0.25)), 7)


# ---------------------------------------------------------------------------
# hash-based reconciliation


def test_hash_ir_noiseless():
    x, y = sample_bsc_pair(24, 0.0, seed=9)
    tr = ir_hash_encode(x, 8, seed=1)
    assert ir_hash_decode(y, tr, 0) == x


def test_hash_ir_failure_rate_and_leakage():
    n, e = 20, 0.1
    t = ball_radius(n, e, 1e-3)
    assert binom.sf(t, n, e) <= 1e-3 < binom.sf(t - 1, n, e)
    k = math.ceil(math.log2(ball_size(n, t))) + 10
    rng = generator(11, "ir")
    src = generator(11, "source")
    failures, trials = 0, 10 ** 4
    for _ in range(trials):
        x, y = sample_bsc_pair(n, e, 0, rng=src)
        tr = ir_hash_encode(x, k, 0, rng=rng)
        assert tr.leakage_bits == k
        try:
            ok = ir_hash_decode(y, tr, t, rng=rng) == x
        except ReconciliationAbort:
            ok = False
        failures += not ok
    assert failures / trials <= 2e-3
    assert hash_failure_bound(n, e, t, k) <= 2e-3


def test_hash_ir_ball_path_and_abort():
    # short hash forces ball enumeration; a far y with a distinct hash aborts
    n = 40
    x = BitString(np.random.default_rng(3).integers(0, 2, n))
    tr = ir_hash_encode(x, 30, seed=2)
    flip = np.zeros(n, dtype=np.uint8)
    flip[:2] = 1
    assert ir_hash_decode(x ^ BitString(flip), tr, 2) == x
    far = x ^ BitString(np.ones(n, dtype=np.uint8))
    with pytest.raises(ReconciliationAbort):
        ir_hash_decode(far, tr, 1)


def test_hash_ir_random_tie_breaking():
    # with a 1-bit hash many ball members match; the choice follows the seed
    x = BitString.zeros(6)
    tr = ir_hash_encode(x, 1, seed=0)
    picks = {str(ir_hash_decode(x, tr, 2, seed=s)) for s in range(30)}
    assert len(picks) > 1
    assert ir_hash_decode(x, tr, 2, seed=4) == ir_hash_decode(x, tr, 2, seed=4)


# ---------------------------------------------------------------------------
# code-based reconciliation


@pytest.mark.parametrize("code", [RepetitionCode(5), RepetitionCode(3), ExtendedHammingCode()])
def test_code_ir_noiseless(code):
    x, y = sample_bsc_pair(83, 0.0, seed=1)
    tr = ir_code_encode(x, code, seed=5)
    blocks = 83 // code.length
    assert tr.leakage_bits == blocks * code.length - code.dim * blocks
    assert ir_code_decode(y, tr, code) == x[: blocks * code.length]


def test_repetition_block_failure_rate():
    e, r = 0.05, 5
    expected = sum(math.comb(5, j) * e ** j * (1 - e) ** (5 - j) for j in range(3, 6))
    assert expected == pytest.approx(1.158e-3, rel=1e-3)
    code = RepetitionCode(r)
    blocks = 10 ** 6
    rng = np.random.default_rng(17)
    noise = (rng.random((blocks, r)) < e).astype(np.uint8)
    words, ok = code.decode(noise)
    wrong = (~ok) | words.any(axis=1)
    sigma = math.sqrt(blocks * expected * (1 - expected))
    assert abs(wrong.sum() - blocks * expected) <= 3 * sigma


def test_hamming_exhaustive_patterns():
    code = ExtendedHammingCode()
    assert _gf2_rank(code.generator.astype(np.int64)) == 4
    for msg in all_seeds(4):
        cw = code.encode(msg[None, :])[0]
        assert int(cw.sum()) in (0, 4, 8)
    patterns = all_seeds(8)
    words, ok = code.decode(patterns)
    correct = ok & ~words.any(axis=1)
    w = patterns.sum(axis=1)
    assert np.all(correct[w <= 1])
    assert not np.any(ok[w == 2])
    assert not np.any(correct[w >= 2])
    e = 0.01
    fail = float(np.sum(np.where(correct, 0.0, e ** w * (1 - e) ** (8 - w))))
    assert fail == pytest.approx(1 - (1 - e) ** 8 - 8 * e * (1 - e) ** 7, rel=1e-12)


def test_code_ir_abort_on_detected_error():
    code = ExtendedHammingCode()
    x = BitString.zeros(8)
    tr = ir_code_encode(x, code, seed=0)
    y = BitString.from_str("11000000")
    with pytest.raises(ReconciliationAbort):
        ir_code_decode(y, tr, code)


# ---------------------------------------------------------------------------
# advantage distillation and parameter estimation


def test_ad_block_cases():
    assert advantage_distill_block([1, 0, 1], [1, 0, 1], 0) == (True, 1, 1)
    assert advantage_distill_block([1, 0, 1], [0, 1, 0], 1) == (True, 1, 0)
    assert advantage_distill_block([1, 0, 1], [1, 1, 1], 0)[0] is False


@given(st.lists(st.integers(0, 1), min_size=1, max_size=8), st.lists(st.integers(0, 1), min_size=8, max_size=8))
def test_ad_block_r_bit_irrelevant(xb, noise):
    yb = [a ^ b for a, b in zip(xb, noise)]
    assert advantage_distill_block(xb, yb, 0)[0] == advantage_distill_block(xb, yb, 1)[0]


@pytest.mark.parametrize("e", [0.02, 0.05, 0.1])
@pytest.mark.parametrize("b", [2, 3, 5])
def test_ad_statistics_match_transform(e, b):
    blocks = 10 ** 5
    x, y = sample_bsc_pair(blocks * b, e, seed=int(1000 * e) + b)
    _, _, stats = advantage_distill(x.bits, y.bits, b, generator(0, "ad"))
    p, lt = ad_transform([1 - 1.5 * e, e / 2, e / 2, e / 2], b)
    err = lt[2] + lt[3]
    sigma_acc = math.sqrt(p * (1 - p) / blocks)
    assert abs(stats.accept_rate - p) <= 3 * sigma_acc
    sigma_err = math.sqrt(err * (1 - err) / stats.accepted)
    assert abs(stats.error_rate - err) <= 3 * sigma_err + 1 / stats.accepted


def test_pe_examples():
    region = L1Region((0, 1), (0.9, 0.1), 0.05)
    assert parameter_estimate([0] * 9 + [1], region).accept
    assert not parameter_estimate([0] * 9 + [1], None).accept
    rng = np.random.default_rng(8)
    trials, m = 1000, 10 ** 4
    ones = rng.binomial(m, 0.2, size=trials)  # distance to reference is 0.2
    rejects = sum(not parameter_estimate(np.r_[np.zeros(m - o), np.ones(o)].astype(int).tolist(), region).accept
                  for o in ones[:50])
    assert rejects == 50
    dist = 2 * np.abs(ones / m - 0.1)
    assert np.mean(dist > 0.05) >= 0.999


def test_pe_unknown_labels_count_fully():
    res = parameter_estimate(["a", "b", "z"], L1Region(("a", "b"), (0.5, 0.5), 2.0))
    assert res.distance == pytest.approx(1 / 6 + 1 / 6 + 1 / 3)


# ---------------------------------------------------------------------------
# pipeline


def test_pipeline_noiseless_all_schemes():
    for ir in ("hash", "repetition", "hamming"):
        rep = run_pipeline(PipelineConfig(2000, 0.0, 1, ir, ell=20, seed=3))
        assert rep["status"] == "ok" and rep["agreement"], ir
        assert rep["key_a"] == rep["key_b"]


def test_pipeline_deterministic_bytes():
    cfg = PipelineConfig(3000, 0.05, 3, "repetition", ell=50, seed=7)
    assert report_json(run_pipeline(cfg)) == report_json(run_pipeline(cfg))
    other = report_json(run_pipeline(PipelineConfig(3000, 0.05, 3, "repetition", ell=50, seed=8)))
    assert other != report_json(run_pipeline(cfg))
    json.loads(other)


def test_pipeline_agreement_over_seeds():
    agree = 0
    for seed in range(100):
        rep = run_pipeline(PipelineConfig(3000, 0.05, 3, "repetition", ell=50, seed=seed))
        assert rep["ell_admissible"] >= 50
        agree += bool(rep.get("agreement"))
    assert agree >= 99


def test_pipeline_warns_on_excess_length():
    with pytest.warns(PipelineWarning):
        rep = run_pipeline(PipelineConfig(1000, 0.0, 1, "repetition", ell=500, seed=1))
    assert rep["warnings"]


def test_pipeline_zero_length_aborts_at_pa():
    rep = run_pipeline(PipelineConfig(100, 0.0, 1, "hash", ell=0, seed=1))
    assert rep["status"] == "abort" and rep["abort_stage"] == "pa"
    assert rep["agreement"] is False
