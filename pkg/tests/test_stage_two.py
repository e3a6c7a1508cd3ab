import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twrelay import linalg, model
from twrelay.model import ChannelSet, ModelError, StreamId, SystemConfig, UL, DL
from twrelay.stage_one import stage_one_search
from twrelay.stage_two import (
    BisectionConfig, _mmse_all, _weighted, align_equalizer_phases, alternating_optimization,
    assemble_power_cone, assemble_sinr_cones, bisect_relay_precoder, design_transceivers,
    initial_relay_precoder, mmse_bs_equalizer, mmse_ms_equalizer,
    solve_relay_precoder_feasibility)
from conftest import PAPER_LAYOUT, crand


def start_point(config, channels):
    s1 = stage_one_search(config, channels)
    b = s1.transceivers
    f0 = initial_relay_precoder(b, channels, config)
    t = b.replace(f_rs=f0, v_bs=b.w_bs.T, v_ms=tuple(w.T for w in b.w_ms))
    return s1, align_equalizer_phases(t, channels, config)


@pytest.fixture(scope="module")
def converged():
    cfg = SystemConfig.from_snr(15.0, **PAPER_LAYOUT)
    ch = model.sample_channels(cfg, 31)
    return cfg, ch, design_transceivers(cfg, ch)


SMALL = dict(n_bs=2, n_rs=2, n_ms=(1, 1), streams=(1, 1))


# ---------------------------------------------------------------- power cone

def test_power_cone_identity_example():
    pc = assemble_power_cone(np.ones(2), np.ones(2), np.eye(2), 1.0, 1.0)
    assert np.isclose(np.linalg.norm(pc.rho(np.eye(2))) ** 2, 6.0)


def test_power_cone_zero_precoder():
    pc = assemble_power_cone(np.ones(2), np.ones(2), np.eye(2), 1.0, 1.0)
    assert np.all(pc.rho(np.zeros((2, 2))) == 0)


def test_power_cone_matches_power_expression(paper_config, paper_channels, rng):
    s1, t = start_point(paper_config, paper_channels)
    pc = assemble_power_cone(t.phi, t.psi, t.a_rs, paper_config.noise, paper_config.p_rs)
    for _ in range(5):
        f = crand(rng, 4, 4)
        expect = model.relay_tx_power(t.replace(f_rs=f), paper_channels, paper_config)
        assert np.isclose(np.linalg.norm(pc.rho(f)) ** 2, expect, rtol=1e-9)
    assert np.isclose(pc.budget, np.sqrt(paper_config.p_rs))


# ---------------------------------------------------------------- SINR cones

def scalar_cone(gamma0, weight=1.0):
    cfg = SystemConfig(1, 1, (1,), (1,), 1.0, 1.0, (1.0,), w_ul=((weight,),), w_dl=((weight,),))
    ch = ChannelSet(np.ones((1, 1)), (np.ones((1, 1)),))
    one = np.ones((1, 1))
    return assemble_sinr_cones(gamma0, one, (one,), ch, np.ones(1), np.ones(1), one, cfg)


@pytest.mark.parametrize("f", [0.1, 0.7, 1.0, 3.0])
@pytest.mark.parametrize("gamma0", [0.05, 0.3, 0.8])
def test_scalar_cone_is_the_sinr_inequality(f, gamma0):
    ul = scalar_cone(gamma0)[0]
    fm = np.full((1, 1), f)
    # UL SINR of the unit scalar chain: f^2 / (f^2 + 1)
    sinr = f * f / (f * f + 1)
    assert (ul.alpha(fm) >= ul.rhs(fm)) == (sinr >= gamma0)


def test_cone_count_and_order(paper_config, paper_channels):
    _, t = start_point(paper_config, paper_channels)
    cones = assemble_sinr_cones(0.5, t.v_bs, t.v_ms, paper_channels, t.phi, t.psi, t.a_rs,
                                paper_config)
    assert [c.direction for c in cones] == [UL] * 4 + [DL] * 4
    assert [c.stream for c in cones] == [0, 1, 2, 3] * 2


def test_larger_weight_shrinks_alpha():
    f = np.ones((1, 1))
    assert scalar_cone(0.5, weight=2.0)[0].alpha(f) < scalar_cone(0.5)[0].alpha(f)


def test_nonpositive_target_rejected():
    with pytest.raises(ModelError):
        scalar_cone(0.0)


def test_cones_imply_weighted_sinr(paper_config, paper_channels, rng):
    _, t = start_point(paper_config, paper_channels)
    ws = _weighted(t, paper_channels, paper_config)
    cones = assemble_sinr_cones(ws.min(), t.v_bs, t.v_ms, paper_channels, t.phi, t.psi, t.a_rs,
                                paper_config)
    for _ in range(30):
        f = t.f_rs + 0.3 * crand(rng, 4, 4)
        cand = t.replace(f_rs=f)
        if all(c.alpha(f) >= c.rhs(f) for c in cones):
            assert _weighted(cand, paper_channels, paper_config).min() >= ws.min() * (1 - 1e-9)


def test_real_part_never_exceeds_modulus(paper_config, paper_channels, rng):
    _, t = start_point(paper_config, paper_channels)
    cones = assemble_sinr_cones(1.0, t.v_bs, t.v_ms, paper_channels, t.phi, t.psi, t.a_rs,
                                paper_config)
    for _ in range(20):
        v = linalg.vec(crand(rng, 4, 4))[:, 0]
        for c in cones:
            assert np.real(c.alpha_coeff @ v) <= abs(c.alpha_coeff @ v) + 1e-12


def test_phase_alignment_keeps_sinr_and_makes_gains_real(paper_config, paper_channels, rng):
    _, t = start_point(paper_config, paper_channels)
    t = t.replace(v_bs=t.v_bs * np.exp(1j * rng.uniform(0, 6, (4, 1))))
    a = align_equalizer_phases(t, paper_channels, paper_config)
    assert np.allclose(_weighted(a, paper_channels, paper_config),
                       _weighted(t, paper_channels, paper_config), rtol=1e-12)
    z = np.einsum("ij,ji->i", a.v_bs @ paper_channels.h_rb.T, a.f_rs)
    assert np.all(z.real > 0) and np.allclose(z.imag, 0, atol=1e-12 * np.abs(z).max())


# ---------------------------------------------------------------- feasibility

def test_vanishing_target_is_feasible(paper_config, paper_channels):
    _, t = start_point(paper_config, paper_channels)
    res = solve_relay_precoder_feasibility(1e-12, t, paper_channels, paper_config)
    assert res is not None


def test_huge_target_is_infeasible(paper_config, paper_channels):
    _, t = start_point(paper_config, paper_channels)
    assert solve_relay_precoder_feasibility(1e9, t, paper_channels, paper_config) is None


def test_feasible_design_is_sound(paper_config, paper_channels):
    _, t = start_point(paper_config, paper_channels)
    g0 = 1.05 * _weighted(t, paper_channels, paper_config).min()
    res = solve_relay_precoder_feasibility(g0, t, paper_channels, paper_config)
    assert res is not None
    d, g = res
    assert g >= g0 * (1 - 1e-6)
    assert model.relay_tx_power(d, paper_channels, paper_config) <= paper_config.p_rs * (1 + 1e-6)


# ---------------------------------------------------------------- bisection

def test_bisection_never_worse_than_incumbent(paper_config, paper_channels):
    _, t = start_point(paper_config, paper_channels)
    g_in = _weighted(t, paper_channels, paper_config).min()
    d, g = bisect_relay_precoder(t, paper_channels, paper_config)
    assert g >= g_in - 1e-9
    assert np.isclose(_weighted(d, paper_channels, paper_config).min(), g)


def test_bisection_infeasible_bracket_returns_incumbent(paper_config, paper_channels):
    _, t = start_point(paper_config, paper_channels)
    g_in = _weighted(t, paper_channels, paper_config).min()
    d, g = bisect_relay_precoder(t, paper_channels, paper_config,
                                 BisectionConfig(gamma_min=1e8, gamma_max=1e9))
    assert np.isclose(g, g_in, rtol=1e-12) and np.array_equal(d.f_rs, t.f_rs)


def test_bisection_matches_linear_scan():
    cfg = SystemConfig.from_snr(10.0, **SMALL)
    ch = model.sample_channels(cfg, 5)
    _, t = start_point(cfg, ch)
    bcfg = BisectionConfig()
    _, g = bisect_relay_precoder(t, ch, cfg, bcfg)
    lo = _weighted(t, ch, cfg).min()
    scan = np.linspace(lo, 2 * g, 200)
    ok = [x for x in scan if solve_relay_precoder_feasibility(x, t, ch, cfg, bcfg) is not None]
    assert ok, "the incumbent level must be feasible"
    assert g >= max(ok) * (1 - bcfg.rel_tol)


# ---------------------------------------------------------------- MMSE

def test_mmse_bs_scalar():
    f, phi, a, h, n0 = 0.8 + 0.2j, 1.5, 0.5, 2.0 - 1.0j, 0.3
    v = mmse_bs_equalizer(np.array([[f]]), [phi], np.array([[a]]), np.array([[h]]), n0)
    g = h * f * phi
    sigma2 = n0 * abs(h * f * a) ** 2 + n0
    assert np.isclose(v[0, 0], np.conj(g) / (abs(g) ** 2 + sigma2))


def test_mmse_ms_single_user_is_plain_mmse(rng):
    cfg = SystemConfig(2, 2, (2,), (2,), 1.0, 1.0, (1.0,))
    f, a, h = crand(rng, 2, 2), crand(rng, 2, 2), crand(rng, 2, 2)
    phi, psi = crand(rng, 2), crand(rng, 2)
    v = mmse_ms_equalizer(f, phi, psi, a, h, 0, 0.5, cfg)
    m = h.T @ f
    g = m * psi[None, :]
    cov = g @ g.conj().T + 0.5 * (m @ a) @ (m @ a).conj().T + 0.5 * np.eye(2)
    assert np.allclose(v, np.linalg.solve(cov, g).conj().T)


def _row_sinr(t, ch, cfg, direction, k, l, row):
    if direction == UL:
        v = t.v_bs.copy()
        v[cfg.offsets[k] + l] = row
        t = t.replace(v_bs=v)
        return model.ul_sinr(t, ch, cfg, StreamId(k, l, UL))
    vs = list(t.v_ms)
    vk = vs[k].copy()
    vk[l] = row
    vs[k] = vk
    return model.dl_sinr(t.replace(v_ms=tuple(vs)), ch, cfg, StreamId(k, l, DL))


def test_mmse_rows_are_local_maxima(paper_config, paper_channels, rng):
    _, t = start_point(paper_config, paper_channels)
    t = _mmse_all(t, paper_channels, paper_config)
    for direction, k, l in [(UL, 0, 1), (UL, 2, 0), (DL, 0, 0), (DL, 1, 0)]:
        base_row = t.v_bs[paper_config.offsets[k] + l] if direction == UL else t.v_ms[k][l]
        base = _row_sinr(t, paper_channels, paper_config, direction, k, l, base_row)
        for _ in range(1000):
            d = crand(rng, base_row.size)
            row = base_row + 1e-3 * np.linalg.norm(base_row) * d / np.linalg.norm(d)
            assert _row_sinr(t, paper_channels, paper_config, direction, k, l, row) <= \
                base * (1 + 1e-6)


# ---------------------------------------------------------------- alternating loop

def test_scalar_chain_end_to_end():
    cfg = SystemConfig(1, 1, (1,), (1,), 1.0, 1.0, (1.0,))
    ch = ChannelSet(np.ones((1, 1)), (np.ones((1, 1)),))
    res = design_transceivers(cfg, ch)
    # f = 1/sqrt(3) spends the budget; SINR = (1/3) / (1/3 + 1) both ways
    assert np.isclose(res.gamma0, 0.25, rtol=1e-3)
    assert res.gamma0 <= 0.25 * (1 + 1e-9)


def test_converged_result_invariants(converged):
    cfg, ch, res = converged
    t = res.transceivers
    assert all(b >= a - 1e-6 for a, b in zip(res.trace, res.trace[1:]))
    assert model.relay_tx_power(t, ch, cfg) <= cfg.p_rs * (1 + 1e-6)
    assert np.allclose(t.w_rs, t.f_rs @ t.a_rs)
    assert np.isclose(res.gamma0, _weighted(t, ch, cfg).min())
    assert res.iterations == len(res.trace) - 1


def test_first_hop_bounds_converged_design(converged):
    cfg, ch, res = converged
    t = res.transceivers
    ul, dl = model.sinr_vectors(t, ch, cfg)
    for k, lk in enumerate(cfg.streams):
        for l in range(lk):
            j = cfg.offsets[k] + l
            assert ul[j] <= model.relay_forward_sinr(t, cfg, StreamId(k, l, UL)) * (1 + 1e-6)
            assert dl[j] <= model.relay_forward_sinr(t, cfg, StreamId(k, l, DL)) * (1 + 1e-6)


def test_restart_from_converged_is_fixed_point(converged):
    cfg, ch, res = converged
    if not res.converged:
        pytest.skip("instance hit the iteration cap")
    again = alternating_optimization(res.stage_one, cfg, ch,
                                     BisectionConfig(max_outer_iter=1), start=res.transceivers)
    assert abs(again.gamma0 - res.gamma0) < 1e-3 * res.gamma0 + 1e-6 or again.gamma0 > res.gamma0


def test_design_deterministic():
    cfg = SystemConfig.from_snr(10.0, **SMALL)
    ch = model.sample_channels(cfg, 2)
    a, b = design_transceivers(cfg, ch), design_transceivers(cfg, ch)
    assert a.trace == b.trace and np.array_equal(a.transceivers.f_rs, b.transceivers.f_rs)


def test_bisection_config_validation():
    with pytest.raises(ValueError):
        BisectionConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        BisectionConfig(gamma_min=2.0, gamma_max=1.0)


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 25.0))
def test_trace_monotone_property(seed, snr):
    cfg = SystemConfig.from_snr(snr, **PAPER_LAYOUT)
    ch = model.sample_channels(cfg, seed)
    res = design_transceivers(cfg, ch, BisectionConfig(max_outer_iter=8))
    assert all(b >= a - 1e-6 for a, b in zip(res.trace, res.trace[1:]))
    assert res.gamma0 >= res.trace[0]
