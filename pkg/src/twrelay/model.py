"""
Two-way amplify-and-forward relay system: configuration, channels,
transceivers and the metrics evaluated on them.

Conventions
-----------
Users and streams are indexed from 0.  Streams are also numbered globally
in user-major order, so user ``k``'s stream ``l`` is global stream
``config.offsets[k] + l``.  Reverse (relay-to-node) channels are the plain
transposes of the stored MAC-phase channels; they are never stored.

The relay transformation is ``W_R = F_R @ A_R`` whenever the two factors
are present; baseline schemes may instead carry ``W_R`` directly.
"""

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import linalg

UL = "ul"
DL = "dl"

POWER_SLACK = 1e-9


class ModelError(ValueError):
    """Invalid configuration, mismatched shapes or a degenerate design."""


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SystemConfig:
    """
    Node counts, antennas, streams, power budgets (linear) and QoS weights.

    ``w_ul[k][l]`` and ``w_dl[k][l]`` are the priority weights (>= 1) of
    user ``k``'s ``l``-th uplink / downlink stream.  When omitted they
    default to one.
    """

    n_bs: int
    n_rs: int
    n_ms: Tuple[int, ...]
    streams: Tuple[int, ...]
    p_bs: float
    p_rs: float
    p_ms: Tuple[float, ...]
    noise: float = 1.0
    w_ul: Optional[Tuple[Tuple[float, ...], ...]] = None
    w_dl: Optional[Tuple[Tuple[float, ...], ...]] = None

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "n_ms", tuple(int(n) for n in self.n_ms))
        set_(self, "streams", tuple(int(n) for n in self.streams))
        set_(self, "p_ms", tuple(float(p) for p in self.p_ms))
        for name in ("w_ul", "w_dl"):
            w = getattr(self, name)
            if w is None:
                w = tuple((1.0,) * lk for lk in self.streams)
            set_(self, name, tuple(tuple(float(x) for x in row) for row in w))
        self.validate()

    def validate(self):
        K = len(self.n_ms)
        if K < 1:
            raise ModelError("need at least one mobile station")
        if len(self.streams) != K or len(self.p_ms) != K:
            raise ModelError("n_ms, streams and p_ms must have one entry per user")
        for k, (nk, lk) in enumerate(zip(self.n_ms, self.streams)):
            if lk < 1:
                raise ModelError(f"user {k} must carry at least one stream")
            if nk < lk:
                raise ModelError(f"user {k}: {nk} antennas cannot carry {lk} streams")
        L = sum(self.streams)
        if self.n_bs < L:
            raise ModelError(f"N_B={self.n_bs} < L={L}")
        if self.n_rs < L:
            raise ModelError(f"N_R={self.n_rs} < L={L}")
        powers = (self.p_bs, self.p_rs, self.noise) + self.p_ms
        if not all(np.isfinite(p) and p > 0 for p in powers):
            raise ModelError("powers and noise must be finite and positive")
        for name in ("w_ul", "w_dl"):
            w = getattr(self, name)
            if len(w) != K or any(len(row) != lk for row, lk in zip(w, self.streams)):
                raise ModelError(f"{name} must be ragged with L_k entries for user k")
            if any(x < 1 for row in w for x in row):
                raise ModelError(f"{name}: weights must be >= 1")

    @classmethod
    def from_snr(cls, snr_db, n_bs, n_rs, n_ms, streams, noise=1.0, w_ul=None, w_dl=None):
        """
        Build a config where SNR = P_B / N0 and every node spends the same
        power per stream: P_B / L = P_R / L = P_k / L_k.
        """
        streams = tuple(int(x) for x in streams)
        L = sum(streams)
        p_bs = float(db2lin(snr_db)) * noise
        per_stream = p_bs / L
        return cls(
            n_bs=n_bs, n_rs=n_rs, n_ms=tuple(n_ms), streams=streams,
            p_bs=p_bs, p_rs=per_stream * L, p_ms=tuple(per_stream * lk for lk in streams),
            noise=noise, w_ul=w_ul, w_dl=w_dl,
        )

    @property
    def K(self) -> int:
        return len(self.n_ms)

    @property
    def L(self) -> int:
        return sum(self.streams)

    @property
    def offsets(self) -> Tuple[int, ...]:
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.streams)[:-1]]))

    def user_slice(self, k: int) -> slice:
        o = self.offsets[k]
        return slice(o, o + self.streams[k])

    def stream_owner(self) -> np.ndarray:
        """User index of every global stream."""
        return np.repeat(np.arange(self.K), self.streams)

    def weights(self) -> Tuple[np.ndarray, np.ndarray]:
        """Flat (UL, DL) weight vectors in global stream order."""
        return (np.concatenate([np.asarray(r) for r in self.w_ul]),
                np.concatenate([np.asarray(r) for r in self.w_dl]))

    @property
    def snr_db(self) -> float:
        return float(lin2db(self.p_bs / self.noise))


@dataclass(frozen=True)
class ChannelSet:
    """MAC-phase channels: BS->RS (N_R x N_B) and MS k->RS (N_R x N_k)."""

    h_rb: np.ndarray
    h_rk: Tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "h_rb", np.asarray(self.h_rb, dtype=complex))
        object.__setattr__(self, "h_rk", tuple(np.asarray(h, dtype=complex) for h in self.h_rk))

    def check(self, config: SystemConfig):
        if self.h_rb.shape != (config.n_rs, config.n_bs):
            raise ModelError(f"H_RB has shape {self.h_rb.shape}, expected {(config.n_rs, config.n_bs)}")
        if len(self.h_rk) != config.K:
            raise ModelError("one MS channel per user required")
        for k, h in enumerate(self.h_rk):
            if h.shape != (config.n_rs, config.n_ms[k]):
                raise ModelError(f"H_R{k} has shape {h.shape}, expected {(config.n_rs, config.n_ms[k])}")
        if not all(np.all(np.isfinite(h)) for h in (self.h_rb,) + self.h_rk):
            raise ModelError("channels must be finite")


@dataclass(frozen=True)
class TransceiverSet:
    """
    All design variables.  Block structure follows the global stream
    order: ``w_bs`` columns, ``a_rs`` rows, ``f_rs`` columns and ``v_bs``
    rows for user ``k`` live at ``config.user_slice(k)``.
    """

    w_bs: np.ndarray
    w_ms: Tuple[np.ndarray, ...]
    a_rs: Optional[np.ndarray] = None
    f_rs: Optional[np.ndarray] = None
    v_bs: Optional[np.ndarray] = None
    v_ms: Optional[Tuple[np.ndarray, ...]] = None
    phi: Optional[np.ndarray] = None
    psi: Optional[np.ndarray] = None
    w_rs: Optional[np.ndarray] = field(default=None)

    @property
    def relay(self) -> np.ndarray:
        """The RS transformation W_R."""
        if self.w_rs is not None:
            return self.w_rs
        if self.f_rs is None or self.a_rs is None:
            raise ModelError("relay transformation not available (F_R or A_R missing)")
        return self.f_rs @ self.a_rs

    def replace(self, **kw) -> "TransceiverSet":
        return replace(self, **kw)


class StreamId(NamedTuple):
    k: int
    l: int
    direction: str

    def index(self, config: SystemConfig) -> int:
        if not 0 <= self.k < config.K or not 0 <= self.l < config.streams[self.k]:
            raise ModelError(f"stream {self} out of range")
        if self.direction not in (UL, DL):
            raise ModelError(f"direction must be {UL!r} or {DL!r}")
        return config.offsets[self.k] + self.l


def crandn(rng, *shape):
    """Circularly-symmetric CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_channels(config: SystemConfig, seed) -> ChannelSet:
    """I.i.d. Rayleigh channels, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    h_rb = crandn(rng, config.n_rs, config.n_bs)
    h_rk = tuple(crandn(rng, config.n_rs, nk) for nk in config.n_ms)
    return ChannelSet(h_rb, h_rk)


def _left_nullity(h):
    # dimension of the relay-side subspace that H_Rk cannot reach
    return linalg.nullity(np.asarray(h).conj().T)


def check_alignment_feasibility(config: SystemConfig, channels: ChannelSet) -> bool:
    channels.check(config)
    L = config.L
    if linalg.rank(channels.h_rb) < L:
        return False
    for h, lk in zip(channels.h_rk, config.streams):
        r = linalg.rank(h)
        if r < lk or r + _left_nullity(h) < L:
            return False
    return True


def check_sdma_feasibility(config: SystemConfig, channels: ChannelSet) -> bool:
    """Rank test for relaying every stream through separate relay dimensions."""
    channels.check(config)
    L = config.L
    if config.n_rs < 2 * L or linalg.rank(channels.h_rb) < L:
        return False
    for h, lk in zip(channels.h_rk, config.streams):
        r = linalg.rank(h)
        if r < lk or r + _left_nullity(h) < 2 * L:
            return False
    return True


def achievable_dof(config: SystemConfig) -> int:
    return min(config.n_bs, config.n_rs, sum(config.n_ms))


def ul_effective(t: TransceiverSet, channels: ChannelSet) -> np.ndarray:
    """U = [H_R1 W_1, ..., H_RK W_K]."""
    return np.hstack([h @ w for h, w in zip(channels.h_rk, t.w_ms)])


def dl_effective(t: TransceiverSet, channels: ChannelSet) -> np.ndarray:
    """D = H_RB W_B."""
    return channels.h_rb @ t.w_bs


def _ratio(num, den):
    if np.any(den <= 0):
        raise ModelError("degenerate equalizer: zero interference-plus-noise term")
    return num / den


def sinr_vectors(t: TransceiverSet, channels: ChannelSet, config: SystemConfig):
    """
    End-to-end SINRs of every UL and DL stream estimate, in global stream
    order, from the general two-hop expressions (no alignment assumed).
    """
    n0 = config.noise
    w_r = t.relay
    U = ul_effective(t, channels)
    D = dl_effective(t, channels)

    tb = t.v_bs @ channels.h_rb.T @ w_r
    g = tb @ U
    desired = np.abs(np.diag(g)) ** 2
    interf = np.sum(np.abs(g) ** 2, axis=1) - desired
    noise = n0 * (np.sum(np.abs(tb) ** 2, axis=1) + np.sum(np.abs(t.v_bs) ** 2, axis=1))
    ul = _ratio(desired, np.maximum(interf, 0.0) + noise)

    dl = np.empty(config.L)
    for k in range(config.K):
        sl = config.user_slice(k)
        tk = t.v_ms[k] @ channels.h_rk[k].T @ w_r
        u_other = U.copy()
        u_other[:, sl] = 0.0
        gk = tk @ np.hstack([D, u_other])
        des = np.abs(np.diag(gk[:, sl])) ** 2
        itf = np.sum(np.abs(gk) ** 2, axis=1) - des
        nz = n0 * (np.sum(np.abs(tk) ** 2, axis=1) + np.sum(np.abs(t.v_ms[k]) ** 2, axis=1))
        dl[sl] = _ratio(des, np.maximum(itf, 0.0) + nz)
    return ul, dl


def sinr_vectors_decomposed(t: TransceiverSet, channels: ChannelSet, config: SystemConfig):
    """
    The same SINRs written through the aligned effective gains phi, psi:
    valid only when the alignment conditions hold on ``t``.
    """
    n0 = config.noise
    phi, psi = np.asarray(t.phi), np.asarray(t.psi)
    Phi, Psi = np.diag(phi), np.diag(psi)
    f, a = t.f_rs, t.a_rs

    tb = t.v_bs @ channels.h_rb.T @ f
    g = tb @ Phi
    desired = np.abs(np.diag(g)) ** 2
    interf = np.sum(np.abs(g) ** 2, axis=1) - desired
    noise = n0 * (np.sum(np.abs(tb @ a) ** 2, axis=1) + np.sum(np.abs(t.v_bs) ** 2, axis=1))
    ul = _ratio(desired, np.maximum(interf, 0.0) + noise)

    dl = np.empty(config.L)
    for k in range(config.K):
        sl = config.user_slice(k)
        tk = t.v_ms[k] @ channels.h_rk[k].T @ f
        phi_other = Phi.copy()
        phi_other[sl, sl] = 0.0
        gk = tk @ np.hstack([Psi, phi_other])
        des = np.abs(np.diag(gk[:, sl])) ** 2
        itf = np.sum(np.abs(gk) ** 2, axis=1) - des
        nz = n0 * (np.sum(np.abs(tk @ a) ** 2, axis=1) + np.sum(np.abs(t.v_ms[k]) ** 2, axis=1))
        dl[sl] = _ratio(des, np.maximum(itf, 0.0) + nz)
    return ul, dl


def ul_sinr(t, channels, config, s: StreamId) -> float:
    if s.direction != UL:
        raise ModelError("ul_sinr needs an uplink stream id")
    return float(sinr_vectors(t, channels, config)[0][s.index(config)])


def dl_sinr(t, channels, config, s: StreamId) -> float:
    if s.direction != DL:
        raise ModelError("dl_sinr needs a downlink stream id")
    return float(sinr_vectors(t, channels, config)[1][s.index(config)])


def ul_sinr_decomposed(t, channels, config, s: StreamId) -> float:
    if s.direction != UL:
        raise ModelError("ul_sinr_decomposed needs an uplink stream id")
    return float(sinr_vectors_decomposed(t, channels, config)[0][s.index(config)])


def dl_sinr_decomposed(t, channels, config, s: StreamId) -> float:
    if s.direction != DL:
        raise ModelError("dl_sinr_decomposed needs a downlink stream id")
    return float(sinr_vectors_decomposed(t, channels, config)[1][s.index(config)])


def weighted_sinrs(t, channels, config):
    ul, dl = sinr_vectors(t, channels, config)
    w_ul, w_dl = config.weights()
    return ul / w_ul, dl / w_dl


def min_weighted_sinr(t, channels, config) -> float:
    wu, wd = weighted_sinrs(t, channels, config)
    return float(min(wu.min(), wd.min()))


def relay_forward_sinr_vectors(t, config):
    """First-hop SINRs |phi|^2 / (N0 |A_R row|^2) and the psi analog."""
    t = getattr(t, "transceivers", t)
    row = config.noise * np.sum(np.abs(t.a_rs) ** 2, axis=1)
    if np.any(row <= 0):
        raise ModelError("zero row in the RS equalizer")
    return np.abs(t.phi) ** 2 / row, np.abs(t.psi) ** 2 / row


def relay_forward_sinr(stage1, config, s: StreamId) -> float:
    ul, dl = relay_forward_sinr_vectors(stage1, config)
    return float((ul if s.direction == UL else dl)[s.index(config)])


def sinr_decomposition_ratio(t, channels, config, s: StreamId) -> float:
    """End-to-end over first-hop SINR; at most one for aligned designs."""
    first = relay_forward_sinr(t, config, s)
    if first <= 0:
        raise ModelError("first-hop SINR is zero")
    e2e = (ul_sinr if s.direction == UL else dl_sinr)(t, channels, config, s)
    return e2e / first


def per_stream_rate(gamma) -> float:
    """Half-duplex rate 0.5 * log2(1 + gamma) in bit/s/Hz."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ModelError("SINR must be nonnegative")
    out = 0.5 * np.log2(1.0 + gamma)
    return float(out) if out.ndim == 0 else out


def sum_rate(t, channels, config) -> float:
    ul, dl = sinr_vectors(t, channels, config)
    return float(np.sum(per_stream_rate(ul)) + np.sum(per_stream_rate(dl)))


def relay_tx_power(t, channels, config) -> float:
    w_r = t.relay
    U = ul_effective(t, channels)
    D = dl_effective(t, channels)
    return float(np.linalg.norm(w_r @ U) ** 2 + np.linalg.norm(w_r @ D) ** 2
                 + config.noise * np.linalg.norm(w_r) ** 2)


def alignment_residual(t, channels, config) -> float:
    """
    Worst relative deviation of A_R^(k) H_Rm W_m and A_R^(k) H_RB W_B,m
    from the diag(phi) / diag(psi) / zero block pattern.
    """
    U = t.a_rs @ ul_effective(t, channels)
    D = t.a_rs @ dl_effective(t, channels)
    worst = 0.0
    for M, g in ((U, t.phi), (D, t.psi)):
        ref = max(np.linalg.norm(M), np.finfo(float).tiny)
        worst = max(worst, np.linalg.norm(M - np.diag(g)) / ref)
    return worst


def check_power_budgets(t, config, slack=POWER_SLACK) -> bool:
    ok = np.linalg.norm(t.w_bs) ** 2 <= config.p_bs * (1 + slack)
    for w, p in zip(t.w_ms, config.p_ms):
        ok &= np.linalg.norm(w) ** 2 <= p * (1 + slack)
    return bool(ok)


class EmpiricalSinr(NamedTuple):
    ul: np.ndarray
    dl: np.ndarray


def _regress(est, sym):
    # est ~ gain * sym + residual, per row
    p = np.mean(np.abs(sym) ** 2, axis=1)
    gain = np.mean(est * sym.conj(), axis=1) / p
    resid = est - gain[:, None] * sym
    return np.abs(gain) ** 2 * p / np.mean(np.abs(resid) ** 2, axis=1)


def simulate_transmission(t, channels, config, num_symbols: int, seed) -> EmpiricalSinr:
    """
    Push random unit-power symbols and noise through both phases, cancel
    each node's own backward-propagated signal and equalize.  Returns the
    empirical SINR of every stream estimate.
    """
    if num_symbols < 1:
        raise ModelError("num_symbols must be >= 1")
    rng = np.random.default_rng(seed)
    n0 = config.noise
    L, N = config.L, int(num_symbols)
    s_ul = crandn(rng, L, N)
    s_dl = crandn(rng, L, N)
    n_r = np.sqrt(n0) * crandn(rng, config.n_rs, N)
    n_b = np.sqrt(n0) * crandn(rng, config.n_bs, N)
    n_k = [np.sqrt(n0) * crandn(rng, nk, N) for nk in config.n_ms]

    w_r = t.relay
    U = ul_effective(t, channels)
    D = dl_effective(t, channels)
    y_r = U @ s_ul + D @ s_dl + n_r
    x_r = w_r @ y_r

    y_b = channels.h_rb.T @ x_r + n_b
    i_b = channels.h_rb.T @ (w_r @ (D @ s_dl))
    ul = _regress(t.v_bs @ (y_b - i_b), s_ul)

    dl = np.empty(L)
    for k in range(config.K):
        sl = config.user_slice(k)
        h = channels.h_rk[k]
        y_k = h.T @ x_r + n_k[k]
        i_k = h.T @ (w_r @ (h @ (t.w_ms[k] @ s_ul[sl])))
        dl[sl] = _regress(t.v_ms[k] @ (y_k - i_k), s_dl[sl])
    return EmpiricalSinr(ul, dl)
