import math

import numpy as np
import pytest

from mmrecon.bits import BitBlock
from mmrecon.channel import ChannelModel, bsc_corrupt, generate_key
from mmrecon.decoder import (
    DecoderConfig,
    DecoderWorkspace,
    c2v_update,
    compute_syndrome,
    decode,
    init_priors,
    reset,
    soft_decision,
    v2c_update,
)
from mmrecon.matrix import DegreeProfile, MatrixEnsemble, ParityCheckMatrix, peg_construct

from oracles import dense_syndrome, ml_syndrome_decode

# frozen oracle values (mpmath, 40 digits)
PRIOR_MAG_E_0_03 = 3.4760986898352731     # ln(0.97/0.03)
C2V_DEG3_2_MINUS1 = -0.7353256640555192   # 2*atanh(tanh(1.0)*tanh(-0.5))


def tiny_matrix():
    # n=3, m=2: check 0 = {0,1}, check 1 = {1,2}
    return ParityCheckMatrix.from_check_adjacency(3, 2, [np.array([0, 1]), np.array([1, 2])])


def deg3_matrix():
    # n=4, m=2: check 0 = {0,1,2} (degree 3), check 1 = {1,2,3}
    return ParityCheckMatrix.from_check_adjacency(4, 2, [np.array([0, 1, 2]), np.array([1, 2, 3])])


def frame(ensemble, e, seed, u=None):
    ens = ensemble if u is None else ensemble.prefix(u)
    key = generate_key(ens.n, seed=seed)
    noisy, _ = bsc_corrupt(key, ChannelModel(e, seed=seed + 10_000))
    syns = [compute_syndrome(h, key) for h in ens.matrices]
    return ens, key, noisy, syns


# ---------------------------------------------------------------------------
# compute_syndrome
# ---------------------------------------------------------------------------

def test_syndrome_zero_key(toy_ensemble):
    h = toy_ensemble.matrices[0]
    z = compute_syndrome(h, BitBlock.zeros(h.n))
    assert z.weight() == 0


def test_syndrome_even_parity():
    # row 0 adjacency {1,3,5}, key bits set at {3,5} -> even parity
    h = ParityCheckMatrix.from_check_adjacency(
        8, 4, [np.array([1, 3, 5]), np.array([0, 2]), np.array([4, 6]), np.array([6, 7])]
    )
    bits = np.zeros(8, dtype=np.uint8)
    bits[[3, 5]] = 1
    z = compute_syndrome(h, BitBlock.from_bits(bits))
    assert z[0] == 0


def test_syndrome_matches_dense_oracle():
    rng = np.random.default_rng(31)
    for seed in range(20):
        h = peg_construct(32, 16, DegreeProfile.regular(3), seed=seed)
        bits = rng.integers(0, 2, size=32, dtype=np.uint8)
        z = compute_syndrome(h, BitBlock.from_bits(bits))
        assert np.array_equal(z.to_bits(), dense_syndrome(h.to_dense(), bits))


def test_syndrome_linearity(mid_ensemble):
    h = mid_ensemble.matrices[0]
    rng = np.random.default_rng(5)
    for _ in range(10):
        a = BitBlock.from_bits(rng.integers(0, 2, size=h.n, dtype=np.uint8))
        b = BitBlock.from_bits(rng.integers(0, 2, size=h.n, dtype=np.uint8))
        assert compute_syndrome(h, a ^ b) == compute_syndrome(h, a) ^ compute_syndrome(h, b)


def test_syndrome_length_check(toy_ensemble):
    with pytest.raises(ValueError, match="length"):
        compute_syndrome(toy_ensemble.matrices[0], BitBlock.zeros(7))


# ---------------------------------------------------------------------------
# init_priors
# ---------------------------------------------------------------------------

def test_priors_known_value():
    pri = init_priors(BitBlock.from_bits(np.array([0, 1], dtype=np.uint8)), 0.03)
    assert pri[0] == pytest.approx(PRIOR_MAG_E_0_03, rel=1e-14)
    assert pri[1] == pytest.approx(-PRIOR_MAG_E_0_03, rel=1e-14)
    assert pri[0] == -pri[1]  # branch-free sign flip is exact


def test_priors_uninformative_limit():
    pri = init_priors(BitBlock.from_bits(np.array([0, 1, 1, 0], dtype=np.uint8)), 0.4999999)
    assert np.all(np.abs(pri) < 1e-6)


def test_priors_domain():
    key = BitBlock.zeros(4)
    for bad in (0.0, 0.5, -0.1, 0.7):
        with pytest.raises(ValueError):
            init_priors(key, bad)


# ---------------------------------------------------------------------------
# c2v / v2c / soft decision micro-behavior
# ---------------------------------------------------------------------------

def test_c2v_degree_two_identity_and_sign():
    h = tiny_matrix()
    ens = MatrixEnsemble((h,))
    ws = DecoderWorkspace(ens)
    for level in (0.8, -2.5):
        ws.v2c[:] = 0.0
        # check 0 edges are (0,0) and (0,1) in that order
        ws.v2c[0] = level
        c2v_update(ws, 0, BitBlock.from_bits(np.array([0, 0], dtype=np.uint8)))
        assert ws.c2v[1] == pytest.approx(level, rel=1e-12)
        c2v_update(ws, 0, BitBlock.from_bits(np.array([1, 0], dtype=np.uint8)))
        assert ws.c2v[1] == pytest.approx(-level, rel=1e-12)


def test_c2v_degree_three_oracle_value():
    h = deg3_matrix()
    ws = DecoderWorkspace(MatrixEnsemble((h,)))
    # check 0 edges: (0,0), (0,1), (0,2); inputs on the first two
    ws.v2c[0] = 2.0
    ws.v2c[1] = -1.0
    ws.v2c[2] = 9.9  # own message, excluded from its extrinsic product
    c2v_update(ws, 0, BitBlock.from_bits(np.array([0, 0], dtype=np.uint8)))
    assert ws.c2v[2] == pytest.approx(C2V_DEG3_2_MINUS1, rel=1e-12)
    c2v_update(ws, 0, BitBlock.from_bits(np.array([1, 0], dtype=np.uint8)))
    assert ws.c2v[2] == pytest.approx(-C2V_DEG3_2_MINUS1, rel=1e-12)


def test_c2v_saturates_at_clamp():
    h = tiny_matrix()
    cfg = DecoderConfig(llr_clamp=12.0)
    ws = DecoderWorkspace(MatrixEnsemble((h,)), cfg)
    ws.v2c[0] = 500.0  # tanh -> 1.0 exactly in double precision
    c2v_update(ws, 0, BitBlock.from_bits(np.array([0, 0], dtype=np.uint8)))
    assert ws.c2v[1] == 12.0


def test_v2c_hand_sum():
    h = tiny_matrix()
    ws = DecoderWorkspace(MatrixEnsemble((h,)))
    ws.priors[:] = (0.0, 0.2, 0.0)
    # variable 1 sits in checks {0, 1}: edges 1 and 2
    ws.c2v[1] = 1.5
    ws.c2v[2] = -0.5
    v2c_update(ws, 0)
    assert ws.v2c[1] == pytest.approx(-0.3, abs=1e-12)  # toward check 0
    assert ws.v2c[2] == pytest.approx(1.7, abs=1e-12)   # toward check 1


def test_v2c_degree_one_variable_gets_prior():
    h = tiny_matrix()
    ws = DecoderWorkspace(MatrixEnsemble((h,)))
    ws.priors[:] = (0.7, 0.0, 0.0)
    ws.c2v[0] = 2.2
    v2c_update(ws, 0)
    assert ws.v2c[0] == pytest.approx(0.7, abs=1e-12)


def test_soft_decision_reduces_to_priors_before_c2v():
    h = tiny_matrix()
    ws = DecoderWorkspace(MatrixEnsemble((h,)))
    ws.priors[:] = (0.5, -1.25, 2.0)
    post = soft_decision(ws)
    assert np.array_equal(post, ws.priors)


def test_soft_decision_joint_hand_sum():
    # two matrices over n=3; variable 1 collects c2v from both
    h1 = tiny_matrix()
    h2 = ParityCheckMatrix.from_check_adjacency(3, 2, [np.array([0, 2]), np.array([0, 1])])
    ws = DecoderWorkspace(MatrixEnsemble((h1, h2)))
    ws.priors[:] = (0.0, -0.3, 0.0)
    # matrix 0 edges at var 1: ids 1, 2; matrix 1 edge at var 1: id 4+...
    sl0, sl1 = ws.matrix_slice(0), ws.matrix_slice(1)
    ws.c2v[1] = 0.4
    ws.c2v[2] = 0.6   # matrix 0 contributes +1.0
    ws.c2v[sl1.start + 3] = 0.5  # matrix 1 check 1 edge (1,1) contributes +0.5
    post = soft_decision(ws)
    assert post[1] == pytest.approx(1.2, abs=1e-12)


def test_hard_decision_tie_goes_to_zero(mid_ensemble):
    ens = mid_ensemble.prefix(1)
    key = BitBlock.zeros(ens.n)
    syns = [compute_syndrome(h, key) for h in ens.matrices]
    res = decode(ens, key, syns, 0.01)
    assert res.corrected == key  # all-zero stays all-zero


# ---------------------------------------------------------------------------
# decode end-to-end
# ---------------------------------------------------------------------------

def test_decode_zero_error_frame(mid_ensemble):
    ens, key, _, syns = frame(mid_ensemble, 0.05, seed=1)
    res = decode(ens, key, syns, 0.05)
    assert res.converged and res.iterations_used == 0
    assert res.corrected == key
    assert res.residual_syndrome_mismatches == 0


def test_decode_toy_code_against_ml_oracle():
    h = peg_construct(16, 8, DegreeProfile.regular(3), seed=13)
    ens = MatrixEnsemble((h,))
    rng = np.random.default_rng(77)
    for trial in range(25):
        key_bits = rng.integers(0, 2, size=16, dtype=np.uint8)
        key = BitBlock.from_bits(key_bits)
        flip = int(rng.integers(16))
        noisy_bits = key_bits.copy()
        noisy_bits[flip] ^= 1
        noisy = BitBlock.from_bits(noisy_bits)
        z = compute_syndrome(h, key)

        err_syn = dense_syndrome(h.to_dense(), noisy_bits) ^ z.to_bits()
        pattern, unique = ml_syndrome_decode(h.to_dense(), err_syn)
        assert pattern is not None and pattern.sum() == 1 and unique

        res = decode(ens, noisy, [z], 0.05)
        assert res.converged
        assert res.corrected == key


def test_decode_far_above_capacity(mid_ensemble):
    # e=0.3 at R=0.5: Monte-Carlo FER ~ 1, every frame must hit the limit
    ens = mid_ensemble.prefix(1)
    cfg = DecoderConfig(max_iterations=40)
    for seed in range(20):
        _, key, noisy, syns = frame(ens, 0.3, seed=seed)
        res = decode(ens, noisy, syns, 0.3, cfg)
        assert not res.converged
        assert res.iterations_used == cfg.max_iterations
        assert res.residual_syndrome_mismatches > 0


def test_converged_implies_syndromes_match(mid_ensemble):
    hit = 0
    for seed in range(40):
        ens, key, noisy, syns = frame(mid_ensemble, 0.07, seed=seed)
        res = decode(ens, noisy, syns, 0.07)
        if res.converged:
            hit += 1
            assert res.residual_syndrome_mismatches == 0
            for h, z in zip(ens.matrices, syns):
                assert compute_syndrome(h, res.corrected) == z
    assert hit > 30  # u=3 at e=0.07 should almost always converge


def test_messages_bounded_and_finite(mid_ensemble):
    cfg = DecoderConfig(max_iterations=25, llr_clamp=18.0)
    for seed, e in ((1, 0.05), (2, 0.11), (3, 0.3)):
        ens, _, noisy, syns = frame(mid_ensemble, e, seed=seed)
        ws = DecoderWorkspace(ens, cfg)
        decode(ens, noisy, syns, e, cfg, workspace=ws)
        for arr in (ws.v2c, ws.c2v, ws.priors, ws.posterior):
            assert np.all(np.isfinite(arr))
        assert np.all(np.abs(ws.v2c) <= 18.0)
        assert np.all(np.abs(ws.c2v) <= 18.0)


def test_decode_dimension_checks(mid_ensemble):
    ens, key, noisy, syns = frame(mid_ensemble, 0.05, seed=4)
    with pytest.raises(ValueError, match="key length"):
        decode(ens, BitBlock.zeros(8), syns, 0.05)
    with pytest.raises(ValueError, match="syndromes"):
        decode(ens, noisy, syns[:2], 0.05)
    with pytest.raises(ValueError, match="syndrome 0"):
        decode(ens, noisy, [BitBlock.zeros(8)] + syns[1:], 0.05)


def test_decode_with_damping_still_converges(mid_ensemble):
    ens, key, noisy, syns = frame(mid_ensemble, 0.05, seed=6)
    res = decode(ens, noisy, syns, 0.05, DecoderConfig(damping=0.25))
    assert res.converged and res.corrected == key


def test_isolated_mode_converges_on_easy_frame(mid_ensemble):
    ens, key, noisy, syns = frame(mid_ensemble, 0.04, seed=7)
    res = decode(ens, noisy, syns, 0.04, DecoderConfig(combining_mode="isolated-per-matrix"))
    assert res.converged and res.corrected == key


def test_config_validation():
    with pytest.raises(ValueError):
        DecoderConfig(max_iterations=0)
    with pytest.raises(ValueError):
        DecoderConfig(llr_clamp=0.0)
    with pytest.raises(ValueError):
        DecoderConfig(damping=1.5)
    with pytest.raises(ValueError):
        DecoderConfig(combining_mode="layered")


# ---------------------------------------------------------------------------
# workspace reset / reuse
# ---------------------------------------------------------------------------

def test_reset_zeroes_state(mid_ensemble):
    ens, _, noisy, syns = frame(mid_ensemble, 0.06, seed=8)
    ws = DecoderWorkspace(ens)
    decode(ens, noisy, syns, 0.06, workspace=ws)
    reset(ws)
    assert not ws.v2c.any() and not ws.c2v.any()
    assert ws.iteration == 0
    reset(ws)  # idempotent
    assert not ws.v2c.any() and ws.iteration == 0


def test_workspace_reuse_is_frame_independent(mid_ensemble):
    ens_a, _, noisy_a, syns_a = frame(mid_ensemble, 0.08, seed=9)
    ens_b, key_b, noisy_b, syns_b = frame(mid_ensemble, 0.05, seed=10)
    ws = DecoderWorkspace(mid_ensemble)
    decode(ens_a, noisy_a, syns_a, 0.08, workspace=ws)
    reset(ws)
    reused = decode(ens_b, noisy_b, syns_b, 0.05, workspace=ws)
    fresh = decode(ens_b, noisy_b, syns_b, 0.05)
    assert reused.corrected == fresh.corrected
    assert reused.iterations_used == fresh.iterations_used
    assert reused.converged == fresh.converged


def test_workspace_ensemble_mismatch(mid_ensemble, toy_ensemble):
    ws = DecoderWorkspace(toy_ensemble)
    _, _, noisy, syns = frame(mid_ensemble, 0.05, seed=11)
    with pytest.raises(ValueError, match="different ensemble"):
        decode(mid_ensemble, noisy, syns, 0.05, workspace=ws)
