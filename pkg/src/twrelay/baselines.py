"""
Reference relay designs used for comparison.

``channel_inversion``
    The BS pre-inverts its channel to the relay so that each DL stream
    lands on the same relay direction as the matching UL stream; the relay
    zero-forces the combined streams on receive and on transmit.  This is a
    reconstruction of a naive pseudo-inverse design, not a replica of any
    specific published algorithm.  Needs N_B >= N_R.

``sdma``
    The relay separates all 2L streams individually and re-beams each one
    to its destination, without exploiting alignment.  Needs N_R >= 2L.

Both use eigenmode MS precoders with equal power and transposed-precoder
MS equalizers.
"""

import enum
from typing import List, Tuple

import numpy as np

from . import linalg
from .model import (ChannelSet, ModelError, SystemConfig, TransceiverSet,
                    check_sdma_feasibility, relay_tx_power)


class BaselineKind(enum.Enum):
    CHANNEL_INVERSION = "channel_inversion"
    SDMA = "sdma"


class BaselineInfeasible(ModelError):
    """The configuration does not admit this baseline."""


def _principal(h, n, power):
    _, _, v = linalg.svd(h)
    return v[:, :n] * np.sqrt(power / n)


def ms_default_transceivers(channels: ChannelSet, config: SystemConfig
                            ) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Top-L_k right singular vectors of H_Rk at equal power; V_k = W_k^T."""
    w = [_principal(h, lk, pk) for h, lk, pk in zip(channels.h_rk, config.streams, config.p_ms)]
    return w, [x.T for x in w]


def _scale_relay(t: TransceiverSet, channels, config) -> TransceiverSet:
    p = relay_tx_power(t, channels, config)
    if p <= 0:
        raise ModelError("relay transformation carries no power")
    return t.replace(w_rs=t.w_rs * np.sqrt(config.p_rs / p))


def baseline_channel_inversion(config: SystemConfig, channels: ChannelSet) -> TransceiverSet:
    channels.check(config)
    if config.n_bs < config.n_rs:
        raise BaselineInfeasible("channel inversion needs N_B >= N_R")
    w_ms, v_ms = ms_default_transceivers(channels, config)
    g = np.hstack([h @ w for h, w in zip(channels.h_rk, w_ms)])
    if linalg.rank(g) < config.L or linalg.rank(channels.h_rb) < config.n_rs:
        raise BaselineInfeasible("channels are rank deficient")
    w_bs = linalg.pinv(channels.h_rb) @ g
    w_bs *= np.sqrt(config.p_bs) / np.linalg.norm(w_bs)
    tx = linalg.pinv(g.T)
    w_r = tx @ linalg.pinv(g)
    v_bs = linalg.pinv(channels.h_rb.T @ tx)
    t = TransceiverSet(w_bs=w_bs, w_ms=tuple(w_ms), v_bs=v_bs, v_ms=tuple(v_ms), w_rs=w_r)
    return _scale_relay(t, channels, config)


def baseline_sdma(config: SystemConfig, channels: ChannelSet) -> TransceiverSet:
    channels.check(config)
    if not check_sdma_feasibility(config, channels):
        raise BaselineInfeasible("SDMA relaying needs N_R >= 2L and full-rank channels")
    L = config.L
    w_ms, v_ms = ms_default_transceivers(channels, config)
    w_bs = _principal(channels.h_rb, L, config.p_bs)
    v_bs = w_bs.T
    u = np.hstack([h @ w for h, w in zip(channels.h_rk, w_ms)])
    rx = linalg.pinv(np.hstack([u, channels.h_rb @ w_bs]))
    # receiver rows: BS rows take the UL streams, MS rows the DL streams
    dest = np.vstack([v_bs @ channels.h_rb.T] + [v @ h.T for v, h in zip(v_ms, channels.h_rk)])
    if linalg.rank(dest) < 2 * L:
        raise BaselineInfeasible("destination directions are rank deficient")
    w_r = linalg.pinv(dest) @ rx
    t = TransceiverSet(w_bs=w_bs, w_ms=tuple(w_ms), v_bs=v_bs, v_ms=tuple(v_ms), w_rs=w_r)
    return _scale_relay(t, channels, config)


def run_baseline(kind: BaselineKind, config: SystemConfig, channels: ChannelSet) -> TransceiverSet:
    if kind is BaselineKind.CHANNEL_INVERSION:
        return baseline_channel_inversion(config, channels)
    if kind is BaselineKind.SDMA:
        return baseline_sdma(config, channels)
    raise ValueError(f"unknown baseline {kind!r}")
