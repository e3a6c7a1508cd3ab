"""
Second-stage design: with the stage-one precoders and relay equalizer
fixed, alternate between the relay precoder F_R (bisection over a
second-order cone feasibility problem) and MMSE equalizers at the BS and
MSs.  Every step can only raise the minimum weighted SINR.

The decision vector of every cone problem is ``[Re vec(F_R); Im vec(F_R)]``
with column-major ``vec``.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import linalg, socp
from .model import (ChannelSet, ModelError, SystemConfig, TransceiverSet, UL, DL,
                    relay_tx_power, sinr_vectors)
from .stage_one import StageOneResult, stage_one_search

log = logging.getLogger(__name__)

MAX_OUTER_ITER = 30
MAX_DOUBLINGS = 20
SOUNDNESS_SLACK = 1e-6


@dataclass(frozen=True)
class SinrConeTerms:
    """
    One weighted-SINR requirement as a complex cone
    ``||beta_map @ vec(F) (+) delta|| <= Re(alpha_coeff @ vec(F))``.
    """

    stream: int
    direction: str
    alpha_coeff: np.ndarray
    beta_map: np.ndarray
    delta_const: float

    def lifted(self) -> socp.SocConstraint:
        a = np.vstack([self.beta_map, np.zeros((1, self.beta_map.shape[1]))])
        b = np.zeros(a.shape[0], dtype=complex)
        b[-1] = self.delta_const
        return socp.lift_complex(a, b, self.alpha_coeff, 0.0)

    def alpha(self, f) -> float:
        return float(np.real(self.alpha_coeff @ linalg.vec(f)[:, 0]))

    def rhs(self, f) -> float:
        beta = self.beta_map @ linalg.vec(f)[:, 0]
        return float(np.sqrt(np.linalg.norm(beta) ** 2 + self.delta_const ** 2))


@dataclass(frozen=True)
class PowerConeTerms:
    rho_map: np.ndarray
    budget: float

    def rho(self, f) -> np.ndarray:
        return self.rho_map @ linalg.vec(f)[:, 0]

    def lifted(self) -> socp.SocConstraint:
        n = self.rho_map.shape[1]
        return socp.lift_complex(self.rho_map, np.zeros(self.rho_map.shape[0]),
                                 np.zeros(n), self.budget)


@dataclass(frozen=True)
class BisectionConfig:
    """
    ``gamma_min`` / ``gamma_max`` left as ``None`` are taken from the
    incumbent design's weighted SINRs.
    """

    gamma_min: Optional[float] = None
    gamma_max: Optional[float] = None
    rel_tol: float = 1e-3
    max_halvings: int = 60
    max_doublings: int = MAX_DOUBLINGS
    loop_rel_tol: float = 1e-3
    max_outer_iter: int = MAX_OUTER_ITER
    socp_tol: float = socp.DEFAULT_TOL
    socp_max_iter: int = socp.DEFAULT_MAX_ITER

    def __post_init__(self):
        if self.rel_tol <= 0 or self.loop_rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        lo, hi = self.gamma_min, self.gamma_max
        if lo is not None and lo < 0:
            raise ValueError("gamma_min must be nonnegative")
        if lo is not None and hi is not None and hi < lo:
            raise ValueError("gamma_max must be >= gamma_min")


@dataclass(frozen=True)
class StageTwoResult:
    transceivers: TransceiverSet
    gamma0: float
    trace: Tuple[float, ...]
    iterations: int = 0
    converged: bool = False
    stage_one: Optional[StageOneResult] = field(default=None, repr=False)


def _gram_sqrt(*parts):
    return linalg.hermitian_sqrt(sum(p @ p.conj().T for p in parts))


def assemble_power_cone(phi, psi, a_r, n0, p_r) -> PowerConeTerms:
    """rho = (S^T kron I) vec(F) with S^2 = Phi Phi^H + Psi Psi^H + N0 A A^H."""
    a_r = np.asarray(a_r, dtype=complex)
    s = _gram_sqrt(np.diag(phi), np.diag(psi), np.sqrt(n0) * a_r)
    n_r = a_r.shape[1]
    return PowerConeTerms(np.kron(s.T, np.eye(n_r)), float(np.sqrt(p_r)))


def _stream_cone(h, gain, weight, gamma0, s, v_norm, n0, j, L, direction):
    n_r = h.size
    alpha = np.zeros(n_r * L, dtype=complex)
    scale = np.sqrt(1.0 + 1.0 / (weight * gamma0)) * abs(gain)
    alpha[j * n_r:(j + 1) * n_r] = scale * h
    beta = np.kron(s.T, h[None, :])
    return SinrConeTerms(j, direction, alpha, beta, float(np.sqrt(n0) * v_norm))


def assemble_sinr_cones(gamma0, v_b, v_ms, channels: ChannelSet, phi, psi, a_r,
                        config: SystemConfig) -> List[SinrConeTerms]:
    """
    One cone per stream and direction (UL first, global stream order).
    Satisfying a cone implies the stream's weighted SINR is at least
    ``gamma0`` for the given equalizers.
    """
    if not gamma0 > 0:
        raise ModelError("target SINR must be positive")
    n0, L = config.noise, config.L
    phi, psi = np.asarray(phi), np.asarray(psi)
    a_r = np.asarray(a_r, dtype=complex)
    w_ul, w_dl = config.weights()
    Phi, Psi = np.diag(phi), np.diag(psi)
    na = np.sqrt(n0) * a_r
    cones = []

    s_ul = _gram_sqrt(Phi, na)
    hb = v_b @ channels.h_rb.T
    for j in range(L):
        cones.append(_stream_cone(hb[j], phi[j], w_ul[j], gamma0, s_ul,
                                  np.linalg.norm(v_b[j]), n0, j, L, UL))
    for k in range(config.K):
        sl = config.user_slice(k)
        phi_other = Phi.copy()
        phi_other[sl, sl] = 0.0
        s_dl = _gram_sqrt(Psi, phi_other, na)
        hk = v_ms[k] @ channels.h_rk[k].T
        for l, j in enumerate(range(sl.start, sl.stop)):
            cones.append(_stream_cone(hk[l], psi[j], w_dl[j], gamma0, s_dl,
                                      np.linalg.norm(v_ms[k][l]), n0, j, L, DL))
    return cones


def _weighted(t, channels, config):
    ul, dl = sinr_vectors(t, channels, config)
    w_ul, w_dl = config.weights()
    return np.concatenate([ul / w_ul, dl / w_dl])


def align_equalizer_phases(t: TransceiverSet, channels: ChannelSet, config: SystemConfig):
    """
    Rotate each equalizer row so that its inner product with the relay
    precoder column of its own stream is real and nonnegative.  SINRs are
    unchanged; the real-part cone tightening becomes exact at ``t``.
    """
    def rot(v, h, cols):
        z = np.einsum("ij,ji->i", v @ h.T, t.f_rs[:, cols])
        mag = np.abs(z)
        ph = np.where(mag > 0, z.conj() / np.where(mag > 0, mag, 1.0), 1.0)
        return v * ph[:, None]

    v_b = rot(t.v_bs, channels.h_rb, slice(None))
    v_ms = [rot(t.v_ms[k], channels.h_rk[k], config.user_slice(k)) for k in range(config.K)]
    return t.replace(v_bs=v_b, v_ms=tuple(v_ms))


def _accept(f, t, channels, config, gamma0):
    """Recheck a candidate precoder against the actual SINR and power limits."""
    cand = t.replace(f_rs=f)
    p = relay_tx_power(cand, channels, config)
    if p > config.p_rs:
        if p > config.p_rs * (1 + SOUNDNESS_SLACK):
            return None
        cand = cand.replace(f_rs=f * np.sqrt(config.p_rs / p))
    try:
        ws = _weighted(cand, channels, config)
    except ModelError:
        return None
    if ws.min() < gamma0 * (1 - SOUNDNESS_SLACK):
        return None
    return cand, float(ws.min())


def solve_relay_precoder_feasibility(gamma0, t: TransceiverSet, channels: ChannelSet,
                                     config: SystemConfig,
                                     bcfg: BisectionConfig = BisectionConfig()):
    """
    Search for F_R meeting every weighted SINR target ``gamma0`` under the
    relay power budget, for the equalizers held in ``t``.  Returns the
    accepted design and its min weighted SINR, or ``None``.
    """
    cones = assemble_sinr_cones(gamma0, t.v_bs, t.v_ms, channels, t.phi, t.psi, t.a_rs, config)
    power = assemble_power_cone(t.phi, t.psi, t.a_rs, config.noise, config.p_rs)
    lifted = []
    for c in cones:
        sc = c.lifted()
        lifted.append(sc.scaled(1.0 / c.delta_const) if c.delta_const > 0 else sc)
    lifted.append(power.lifted().scaled(1.0 / power.budget))
    n = lifted[0].c_row.size
    out = socp.solve_margin(socp.SocpProblem(n, lifted), tol=bcfg.socp_tol,
                            max_iter=bcfg.socp_max_iter, early_exit=True,
                            x0=socp.lift_vector(linalg.vec(t.f_rs)))
    if out.status is socp.Status.INDETERMINATE:
        log.warning("relay precoder problem indeterminate at target %.6g; treated as infeasible",
                    gamma0)
        return None
    if not out.feasible:
        return None
    f = linalg.unvec(socp.unlift_vector(out.point), config.n_rs, config.L)
    return _accept(f, t, channels, config, gamma0)


def bisect_relay_precoder(t: TransceiverSet, channels: ChannelSet, config: SystemConfig,
                          bcfg: BisectionConfig = BisectionConfig()):
    """
    Bisection over the common weighted SINR target.  ``t`` carries the
    incumbent F_R and the fixed equalizers.  Returns ``(design, gamma0)``;
    the design is never worse than the incumbent.
    """
    t = align_equalizer_phases(t, channels, config)
    ws = _weighted(t, channels, config)
    best, best_g = t, float(ws.min())
    lo = best_g if bcfg.gamma_min is None else max(bcfg.gamma_min, 0.0)
    hi = float(ws.max()) if bcfg.gamma_max is None else bcfg.gamma_max
    if lo <= 0:
        lo = np.finfo(float).tiny
    hi = max(hi, lo * (1 + 2 * bcfg.rel_tol))

    def probe(g):
        nonlocal best, best_g
        res = solve_relay_precoder_feasibility(g, t, channels, config, bcfg)
        if res is None:
            return False
        if res[1] > best_g:
            best, best_g = res
        return True

    for _ in range(bcfg.max_doublings):
        if not probe(hi):
            break
        lo, hi = max(hi, best_g), 2 * max(hi, best_g)
    for _ in range(bcfg.max_halvings):
        if hi - lo <= bcfg.rel_tol * lo:
            break
        mid = 0.5 * (lo + hi)
        if probe(mid):
            lo = max(mid, best_g)
        else:
            hi = mid
    return best, best_g


def mmse_bs_equalizer(f_r, phi, a_r, h_rb, n0) -> np.ndarray:
    """V_B = G^H (G G^H + Omega_B)^-1 with G = H_RB^T F_R Phi."""
    m = h_rb.T @ f_r
    g = m * np.asarray(phi)[None, :]
    na = m @ a_r
    cov = g @ g.conj().T + n0 * (na @ na.conj().T) + n0 * np.eye(h_rb.shape[1])
    return np.linalg.solve(cov, g).conj().T


def mmse_ms_equalizer(f_r, phi, psi, a_r, h_rk, k, n0, config: SystemConfig) -> np.ndarray:
    """MMSE equalizer of user ``k``: own DL streams against [Psi, Phi~_k] and noise."""
    sl = config.user_slice(k)
    m = h_rk.T @ f_r
    psi = np.asarray(psi)
    phi_other = np.array(phi, dtype=complex)
    phi_other[sl] = 0.0
    desired = m[:, sl] * psi[sl][None, :]
    span = np.hstack([m * psi[None, :], m * phi_other[None, :]])
    na = m @ a_r
    cov = span @ span.conj().T + n0 * (na @ na.conj().T) + n0 * np.eye(h_rk.shape[1])
    return np.linalg.solve(cov, desired).conj().T


def initial_relay_precoder(stage1: TransceiverSet, channels, config) -> np.ndarray:
    """c * pinv(A_R), scaled to spend the relay budget exactly."""
    f = linalg.pinv(stage1.a_rs)
    p = relay_tx_power(stage1.replace(f_rs=f), channels, config)
    return f * np.sqrt(config.p_rs / p)


def _mmse_all(t, channels, config):
    n0 = config.noise
    v_b = mmse_bs_equalizer(t.f_rs, t.phi, t.a_rs, channels.h_rb, n0)
    v_ms = tuple(mmse_ms_equalizer(t.f_rs, t.phi, t.psi, t.a_rs, channels.h_rk[k], k, n0, config)
                 for k in range(config.K))
    return t.replace(v_bs=v_b, v_ms=v_ms)


def alternating_optimization(stage1: StageOneResult, config: SystemConfig, channels: ChannelSet,
                             bcfg: BisectionConfig = BisectionConfig(),
                             start: Optional[TransceiverSet] = None) -> StageTwoResult:
    """
    Alternate relay precoder bisection and MMSE equalizer updates until the
    min weighted SINR improves by less than ``bcfg.loop_rel_tol``.
    ``start`` resumes from a complete design instead of the default
    initialization.
    """
    base = stage1.transceivers if isinstance(stage1, StageOneResult) else stage1
    if start is None:
        f0 = initial_relay_precoder(base, channels, config)
        # transposed precoders: matched receivers under channel reciprocity
        t = base.replace(f_rs=f0, v_bs=base.w_bs.T, v_ms=tuple(w.T for w in base.w_ms))
    else:
        t = start
    g = float(_weighted(t, channels, config).min())
    trace = [g]
    converged = False
    it = 0
    for it in range(1, bcfg.max_outer_iter + 1):
        t, _ = bisect_relay_precoder(t, channels, config, bcfg)
        cand = _mmse_all(t, channels, config)
        g_new = float(_weighted(cand, channels, config).min())
        if g_new >= g:
            t = cand
        else:  # MMSE never lowers a stream's SINR; only rounding lands here
            g_new = float(_weighted(t, channels, config).min())
        trace.append(g_new)
        if g_new - g < bcfg.loop_rel_tol * max(g, np.finfo(float).tiny):
            g = max(g, g_new)
            converged = True
            break
        g = g_new
    t = t.replace(w_rs=t.f_rs @ t.a_rs)
    return StageTwoResult(t, float(trace[-1]), tuple(trace), it, converged,
                          stage1 if isinstance(stage1, StageOneResult) else None)


def design_transceivers(config: SystemConfig, channels: ChannelSet,
                        bcfg: BisectionConfig = BisectionConfig()) -> StageTwoResult:
    """Full two-stage design for one channel realization."""
    s1 = stage_one_search(config, channels)
    return alternating_optimization(s1, config, channels, bcfg)
