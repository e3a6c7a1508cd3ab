"""
First-stage design: align every user's UL and DL streams at the relay
and maximize the minimum weighted first-hop SINR.

MS beams are right singular vectors of H_Rk, the relay equalizer A_R
zero-forces the stacked UL directions, and each BS beam lives in the null
space of the other A_R rows seen through H_RB.  Given the beams the power
split is closed form (:func:`power_allocation`), and the beam choice is an
exhaustive search over MS singular-vector subsets.
"""

import itertools
import logging
from dataclasses import dataclass
from math import comb
from typing import List, Sequence, Tuple

import numpy as np

from . import linalg
from .model import ChannelSet, ModelError, SystemConfig, TransceiverSet

log = logging.getLogger(__name__)

SEARCH_CAP = 100_000


class InfeasibleSelection(ModelError):
    """A beam selection that cannot be zero-forced or carries no gain."""


@dataclass(frozen=True)
class BeamSelection:
    ms_beams: Tuple[Tuple[int, ...], ...]
    bs_beams: Tuple[int, ...]


@dataclass(frozen=True)
class PowerAllocation:
    lambda_ms: np.ndarray
    lambda_bs: np.ndarray


@dataclass(frozen=True)
class StageOneResult:
    transceivers: TransceiverSet
    kappa_ul: np.ndarray
    kappa_dl: np.ndarray
    achieved_min_weighted_sinr: float
    selection: BeamSelection
    allocation: PowerAllocation


def ms_candidate_beams(h) -> List[np.ndarray]:
    """Right singular vectors of ``h`` with nonzero singular value."""
    u, s, v = linalg.svd(h)
    r = int(np.sum(s > linalg.rank_cutoff(s, np.shape(h))))
    return [v[:, i].copy() for i in range(r)]


def rs_zf_equalizer(channels: ChannelSet, directions: Sequence[np.ndarray]) -> np.ndarray:
    """
    Zero-forcing relay equalizer.

    ``directions[k]`` is the N_k x L_k matrix of unit beams chosen for user
    k.  Returns ``pinv([H_R1 G_1, ..., H_RK G_K])``; raises
    :class:`InfeasibleSelection` if the stacked matrix is rank deficient.
    """
    stacked = np.hstack([h @ g for h, g in zip(channels.h_rk, directions)])
    if linalg.rank(stacked) < stacked.shape[1]:
        raise InfeasibleSelection("stacked UL directions are rank deficient")
    return linalg.pinv(stacked)


def bs_candidate_beams(a_r, h_rb, row: int) -> List[np.ndarray]:
    """
    Unit BS beams invisible to every relay-equalizer row except ``row``.

    The list holds the orthonormal basis of ``null(A~ H_RB)`` followed by
    the matched direction projected onto that null space, which has the
    largest gain through ``row`` among all null-space beams.
    """
    a_r = np.asarray(a_r)
    others = np.delete(a_r, row, axis=0) @ h_rb
    basis = linalg.null_space(others)
    if basis.shape[1] == 0:
        raise ModelError("BS null space is empty (need N_B >= L)")
    cands = [basis[:, i].copy() for i in range(basis.shape[1])]
    r = a_r[row] @ h_rb
    proj = basis @ (basis.conj().T @ r.conj())
    nrm = np.linalg.norm(proj)
    if nrm > 0:
        cands.append(proj / nrm)
    return cands


def _kappa(a_r, eff, n0):
    """|a_j . eff_j|^2 / (N0 |a_j|^2) for each row j of a_r / column j of eff."""
    num = np.abs(np.einsum("ij,ji->i", a_r, eff)) ** 2
    return num / (n0 * np.sum(np.abs(a_r) ** 2, axis=1))


def effective_gains_kappa(a_r, channels: ChannelSet, ms_dirs, bs_dirs, config: SystemConfig):
    """
    Per-stream gain coefficients so that the first-hop SINR equals
    kappa * allocated power.  ``ms_dirs`` is the per-user list of N_k x L_k
    beam matrices and ``bs_dirs`` the N_B x L matrix of BS beams.
    """
    u_eff = np.hstack([h @ g for h, g in zip(channels.h_rk, ms_dirs)])
    d_eff = channels.h_rb @ bs_dirs
    k_ul = _kappa(a_r, u_eff, config.noise)
    k_dl = _kappa(a_r, d_eff, config.noise)
    if np.any(k_ul <= 0) or np.any(k_dl <= 0):
        raise InfeasibleSelection("a selected beam is orthogonal to its equalizer row")
    return k_ul, k_dl


def power_allocation(kappa_ul, kappa_dl, config: SystemConfig) -> PowerAllocation:
    """
    Max-min weighted power split: every MS equalizes its own weighted UL
    SINRs and the BS equalizes all weighted DL SINRs, spending the whole
    budget.
    """
    kappa_ul = np.asarray(kappa_ul, dtype=float)
    kappa_dl = np.asarray(kappa_dl, dtype=float)
    if np.any(kappa_ul <= 0) or np.any(kappa_dl <= 0):
        raise ModelError("gain coefficients must be positive")
    w_ul, w_dl = config.weights()
    lam_ms = np.empty(config.L)
    for k in range(config.K):
        sl = config.user_slice(k)
        x = w_ul[sl] / kappa_ul[sl]
        lam_ms[sl] = x * config.p_ms[k] / x.sum()
    x = w_dl / kappa_dl
    lam_bs = x * config.p_bs / x.sum()
    return PowerAllocation(lam_ms, lam_bs)


def weighted_first_hop(kappa_ul, kappa_dl, config: SystemConfig):
    """Closed-form weighted first-hop SINRs after the optimal power split."""
    w_ul, w_dl = config.weights()
    ul = np.empty(config.L)
    for k in range(config.K):
        sl = config.user_slice(k)
        ul[sl] = config.p_ms[k] / np.sum(w_ul[sl] / kappa_ul[sl])
    dl = np.full(config.L, config.p_bs / np.sum(w_dl / kappa_dl))
    return ul, dl


def _objective(kappa_ul, kappa_dl, config):
    ul, dl = weighted_first_hop(kappa_ul, kappa_dl, config)
    return min(ul.min(), dl.min())


def _best_bs_beams(a_r, h_rb, n0):
    """Per-stream argmax of the DL gain over the finite BS candidate sets."""
    idx, beams, kap = [], [], []
    for j in range(a_r.shape[0]):
        cands = bs_candidate_beams(a_r, h_rb, j)
        gains = [np.abs(a_r[j] @ h_rb @ c) ** 2 for c in cands]
        best = int(np.argmax(gains))  # first maximum wins ties
        idx.append(best)
        beams.append(cands[best])
        kap.append(gains[best] / (n0 * np.linalg.norm(a_r[j]) ** 2))
    return tuple(idx), np.column_stack(beams), np.asarray(kap)


def _evaluate(config, channels, ms_cands, ms_choice):
    dirs = [np.column_stack([ms_cands[k][i] for i in sel]) for k, sel in enumerate(ms_choice)]
    a_r = rs_zf_equalizer(channels, dirs)
    bs_idx, bs_dirs, _ = _best_bs_beams(a_r, channels.h_rb, config.noise)
    k_ul, k_dl = effective_gains_kappa(a_r, channels, dirs, bs_dirs, config)
    return _objective(k_ul, k_dl, config), dirs, a_r, bs_idx, bs_dirs, k_ul, k_dl


def _ms_choices(config, ms_cands):
    return [list(itertools.combinations(range(len(c)), lk))
            for c, lk in zip(ms_cands, config.streams)]


def _greedy(config, channels, ms_cands, choices):
    current = [opts[0] for opts in choices]
    best = None
    for k, opts in enumerate(choices):
        for opt in opts:
            trial = list(current)
            trial[k] = opt
            try:
                res = _evaluate(config, channels, ms_cands, trial)
            except InfeasibleSelection:
                continue
            if best is None or res[0] > best[0][0]:
                best = (res, tuple(trial))
        if best is not None:
            current = list(best[1])
    return best


def build_stage_one(config, channels, ms_choice, dirs, a_r, bs_idx, bs_dirs, k_ul, k_dl):
    """Assemble precoders and effective gains for a fixed beam selection."""
    alloc = power_allocation(k_ul, k_dl, config)
    # phase-rotate BS beams so each psi comes out real and positive
    gains = np.einsum("ij,ji->i", a_r, channels.h_rb @ bs_dirs)
    bs_dirs = bs_dirs * (gains.conj() / np.abs(gains))
    w_bs = bs_dirs * np.sqrt(alloc.lambda_bs)
    w_ms = []
    for k in range(config.K):
        w_ms.append(dirs[k] * np.sqrt(alloc.lambda_ms[config.user_slice(k)]))
    u_eff = np.hstack([h @ w for h, w in zip(channels.h_rk, w_ms)])
    phi = np.einsum("ij,ji->i", a_r, u_eff)
    psi = np.einsum("ij,ji->i", a_r, channels.h_rb @ w_bs)
    t = TransceiverSet(w_bs=w_bs, w_ms=tuple(w_ms), a_rs=a_r, phi=phi, psi=psi)
    sel = BeamSelection(tuple(tuple(c) for c in ms_choice), tuple(bs_idx))
    return StageOneResult(t, k_ul, k_dl, _objective(k_ul, k_dl, config), sel, alloc)


def stage_one_search(config: SystemConfig, channels: ChannelSet, cap: int = SEARCH_CAP) -> StageOneResult:
    """
    Search MS beam subsets (jointly over users, lexicographic order) and,
    for each, the best BS beam per stream; keep the selection with the
    largest minimum weighted first-hop SINR.  Earlier selections win ties.
    """
    channels.check(config)
    ms_cands = [ms_candidate_beams(h) for h in channels.h_rk]
    choices = _ms_choices(config, ms_cands)
    if any(len(c) == 0 for c in choices):
        raise ModelError("some user has fewer usable beams than streams")
    total = int(np.prod([comb(len(c), lk) for c, lk in zip(ms_cands, config.streams)]))

    if total > cap:
        log.warning("beam search over %d selections exceeds cap %d; using greedy", total, cap)
        found = _greedy(config, channels, ms_cands, choices)
    else:
        found = None
        for choice in itertools.product(*choices):
            try:
                res = _evaluate(config, channels, ms_cands, choice)
            except InfeasibleSelection:
                continue
            if found is None or res[0] > found[0][0]:
                found = (res, choice)
    if found is None:
        raise ModelError("no admissible beam selection")
    (_, dirs, a_r, bs_idx, bs_dirs, k_ul, k_dl), choice = found
    return build_stage_one(config, channels, choice, dirs, a_r, bs_idx, bs_dirs, k_ul, k_dl)
