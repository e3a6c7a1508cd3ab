"""
Seeded Monte Carlo sweeps over SNR and BS antenna count.

Config schema (YAML, unknown keys rejected)::

    base_config:
      n_bs: 4            # default N_B when nb_points is absent
      n_rs: 4
      n_ms: [2, 2, 2]
      streams: [2, 1, 1]
      noise: 1.0         # optional
      w_ul: [[1, 1], [2], [1]]   # optional, ragged
      w_dl: [[1, 1], [2], [1]]   # optional, ragged
    snr_db_points: [0, 5, 10]
    nb_points: [4, 6]    # optional
    trials: 100
    master_seed: 1
    schemes: [proposed, channel_inversion, sdma]

Sweep points are ordered N_B-major: every SNR value for the first N_B,
then every SNR value for the next.  Powers follow the equal
power-per-stream rule with SNR = P_B / N0.

The channel seed of ``(point, trial)`` is a splitmix64 mix of
``(master_seed, point, trial)`` and does not depend on the scheme, so all
schemes see identical channels.
"""

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from . import baselines
from .model import (ModelError, SystemConfig, check_alignment_feasibility, lin2db,
                    min_weighted_sinr, sample_channels, sinr_vectors, sum_rate)
from .stage_two import BisectionConfig, design_transceivers

log = logging.getLogger(__name__)

PROPOSED = "proposed"
CHANNEL_INVERSION = baselines.BaselineKind.CHANNEL_INVERSION.value
SDMA = baselines.BaselineKind.SDMA.value
GREEDY = "greedy"
SCHEMES = (PROPOSED, CHANNEL_INVERSION, SDMA, GREEDY)

_MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    """Malformed or inconsistent sweep specification."""


class NumericalFailure(RuntimeError):
    def __init__(self, msg, seed):
        super().__init__(msg)
        self.seed = seed


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def trial_seed(master_seed: int, point: int, trial: int) -> int:
    h = splitmix64(master_seed & _MASK64)
    h = splitmix64(h ^ (point & _MASK64))
    return splitmix64(h ^ (trial & _MASK64))


@dataclass(frozen=True)
class BaseConfig:
    n_bs: int
    n_rs: int
    n_ms: Tuple[int, ...]
    streams: Tuple[int, ...]
    noise: float = 1.0
    w_ul: Optional[Tuple[Tuple[float, ...], ...]] = None
    w_dl: Optional[Tuple[Tuple[float, ...], ...]] = None

    def at(self, snr_db: float, n_bs: Optional[int] = None) -> SystemConfig:
        return SystemConfig.from_snr(snr_db, self.n_bs if n_bs is None else n_bs, self.n_rs,
                                     self.n_ms, self.streams, self.noise, self.w_ul, self.w_dl)


@dataclass(frozen=True)
class SweepSpec:
    base_config: BaseConfig
    snr_db_points: Tuple[float, ...]
    trials: int
    master_seed: int
    schemes: Tuple[str, ...]
    nb_points: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.snr_db_points:
            raise ConfigError("at least one SNR point is required")
        if self.nb_points is not None and not self.nb_points:
            raise ConfigError("nb_points, when given, must be non-empty")
        if not self.schemes:
            raise ConfigError("at least one scheme is required")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ConfigError(f"unknown schemes {bad}; choose from {list(SCHEMES)}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ConfigError("schemes must be distinct")

    def points(self) -> List[Tuple[float, int]]:
        nbs = self.nb_points or (self.base_config.n_bs,)
        return [(float(s), int(nb)) for nb in nbs for s in self.snr_db_points]

    def with_seed(self, seed: int) -> "SweepSpec":
        return SweepSpec(self.base_config, self.snr_db_points, self.trials, seed,
                         self.schemes, self.nb_points)


_TOP_KEYS = {"base_config", "snr_db_points", "nb_points", "trials", "master_seed", "schemes"}
_BASE_KEYS = {"n_bs", "n_rs", "n_ms", "streams", "noise", "w_ul", "w_dl"}


def _ragged(w):
    return None if w is None else tuple(tuple(float(x) for x in row) for row in w)


def spec_from_dict(d) -> SweepSpec:
    if not isinstance(d, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    missing = {"base_config", "snr_db_points", "trials", "master_seed", "schemes"} - set(d)
    if missing:
        raise ConfigError(f"missing keys: {sorted(missing)}")
    b = d["base_config"]
    if not isinstance(b, dict):
        raise ConfigError("base_config must be a mapping")
    unknown = set(b) - _BASE_KEYS
    if unknown:
        raise ConfigError(f"unknown base_config keys: {sorted(unknown)}")
    try:
        base = BaseConfig(int(b["n_bs"]), int(b["n_rs"]), tuple(int(x) for x in b["n_ms"]),
                          tuple(int(x) for x in b["streams"]), float(b.get("noise", 1.0)),
                          _ragged(b.get("w_ul")), _ragged(b.get("w_dl")))
        nb = d.get("nb_points")
        spec = SweepSpec(base, tuple(float(x) for x in d["snr_db_points"]), int(d["trials"]),
                         int(d["master_seed"]), tuple(str(s) for s in d["schemes"]),
                         None if nb is None else tuple(int(x) for x in nb))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad config value: {exc}") from exc
    # the base config itself must be valid at the first point
    try:
        s0, nb0 = spec.points()[0]
        base.at(s0, nb0)
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc
    return spec


def load_spec(path) -> SweepSpec:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return spec_from_dict(data)


@dataclass(frozen=True)
class TrialRecord:
    scheme: str
    point: int
    snr_db: float
    n_b: int
    trial: int
    seed: int
    feasible: bool
    flag: str = ""
    sinr_ul: Tuple[float, ...] = ()
    sinr_dl: Tuple[float, ...] = ()
    min_weighted_sinr: float = math.nan
    sum_rate: float = math.nan
    iterations: int = 0
    wall_ms: float = math.nan


def scheme_feasibility(scheme: str, config: SystemConfig) -> str:
    """Empty string if the scheme can run on ``config``, else a reason token."""
    if scheme == GREEDY:
        return "unavailable"
    if scheme == SDMA and config.n_rs < 2 * config.L:
        return "needs_nr_ge_2l"
    if scheme == CHANNEL_INVERSION and config.n_bs < config.n_rs:
        return "needs_nb_ge_nr"
    return ""


def run_trial(scheme: str, base: BaseConfig, point: int, snr_db: float, n_b: int,
              trial: int, seed: int, bcfg: BisectionConfig = BisectionConfig()) -> TrialRecord:
    head = dict(scheme=scheme, point=point, snr_db=snr_db, n_b=n_b, trial=trial, seed=seed)
    t0 = time.perf_counter()
    try:
        config = base.at(snr_db, n_b)
    except ModelError:
        return TrialRecord(**head, feasible=False, flag="invalid_dims")
    reason = scheme_feasibility(scheme, config)
    if reason:
        return TrialRecord(**head, feasible=False, flag=reason)
    channels = sample_channels(config, seed)
    iterations = 0
    try:
        if scheme == PROPOSED:
            if not check_alignment_feasibility(config, channels):
                return TrialRecord(**head, feasible=False, flag="alignment_rank")
            res = design_transceivers(config, channels, bcfg)
            t, iterations = res.transceivers, res.iterations
        else:
            t = baselines.run_baseline(baselines.BaselineKind(scheme), config, channels)
        ul, dl = sinr_vectors(t, channels, config)
        mws = min_weighted_sinr(t, channels, config)
        rate = sum_rate(t, channels, config)
    except baselines.BaselineInfeasible:
        return TrialRecord(**head, feasible=False, flag="rank_deficient")
    except (ModelError, np.linalg.LinAlgError, FloatingPointError) as exc:
        raise NumericalFailure(f"{scheme} failed at point {point} trial {trial}: {exc}", seed) from exc
    vals = np.concatenate([ul, dl, [mws, rate]])
    if not np.all(np.isfinite(vals)):
        raise NumericalFailure(f"{scheme} produced non-finite metrics", seed)
    return TrialRecord(**head, feasible=True, sinr_ul=tuple(map(float, ul)),
                       sinr_dl=tuple(map(float, dl)), min_weighted_sinr=float(mws),
                       sum_rate=float(rate), iterations=int(iterations),
                       wall_ms=1e3 * (time.perf_counter() - t0))


def _run_task(args):
    return run_trial(*args)


def _tasks(spec: SweepSpec, bcfg):
    out = []
    for scheme in spec.schemes:
        for p, (snr, nb) in enumerate(spec.points()):
            for trial in range(spec.trials):
                out.append((scheme, spec.base_config, p, snr, nb, trial,
                            trial_seed(spec.master_seed, p, trial), bcfg))
    return out


def run_sweep(spec: SweepSpec, workers: int = 1,
              bcfg: BisectionConfig = BisectionConfig()) -> List[TrialRecord]:
    """
    One record per (scheme, point, trial) in that canonical order.  Results
    do not depend on ``workers``.
    """
    tasks = _tasks(spec, bcfg)
    if workers <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks, chunksize=1))


@dataclass(frozen=True)
class SummaryRow:
    scheme: str
    snr_db: float
    n_b: int
    trials: int
    feasible_fraction: float
    mean_sum_rate: float
    stderr_sum_rate: float
    mean_min_weighted_sinr: float
    stderr_min_weighted_sinr: float


def _mean_stderr(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def aggregate(records: Sequence[TrialRecord]) -> List[SummaryRow]:
    """Mean and standard error over feasible trials per (scheme, point)."""
    if not records:
        raise ValueError("no records to aggregate")
    groups: Dict[Tuple[str, int], List[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.scheme, r.point), []).append(r)
    rows = []
    for (scheme, _), rs in groups.items():
        ok = [r for r in rs if r.feasible]
        mr, sr = _mean_stderr([r.sum_rate for r in ok])
        mg, sg = _mean_stderr([r.min_weighted_sinr for r in ok])
        rows.append(SummaryRow(scheme, rs[0].snr_db, rs[0].n_b, len(rs), len(ok) / len(rs),
                               mr, sr, mg, sg))
    return rows


def _fmt(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else format(x, ".12g")


def _db(x) -> str:
    return _fmt(float(lin2db(x)) if x > 0 else -math.inf) if not math.isnan(x) else ""


def csv_columns(streams: Sequence[int]) -> List[str]:
    cols = ["scheme", "snr_db", "n_b", "trial", "seed", "feasible", "min_weighted_sinr_db",
            "sum_rate_bps_hz", "iterations"]
    for d in ("ul", "dl"):
        for k, lk in enumerate(streams):
            cols += [f"sinr_{d}_{k + 1}_{l + 1}_db" for l in range(lk)]
    return cols + ["wall_ms"]


def records_to_csv(records: Sequence[TrialRecord], streams: Sequence[int],
                   timing: bool = False) -> str:
    """
    ``feasible`` is ``yes`` or ``no:<reason>``.  ``wall_ms`` is left empty
    unless ``timing`` is set, so repeated runs are byte-identical.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_columns(streams))
    L = sum(streams)
    for r in records:
        row = [r.scheme, _fmt(r.snr_db), r.n_b, r.trial, r.seed,
               "yes" if r.feasible else f"no:{r.flag}"]
        if r.feasible:
            row += [_db(r.min_weighted_sinr), _fmt(r.sum_rate), r.iterations]
            row += [_db(x) for x in r.sinr_ul + r.sinr_dl]
        else:
            row += ["", "", ""] + [""] * (2 * L)
        row.append(_fmt(round(r.wall_ms, 3)) if timing and r.feasible else "")
        w.writerow(row)
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    return x


def report_json(spec: SweepSpec, records, timing: bool = False) -> str:
    recs = []
    for r in records:
        d = asdict(r)
        if not timing:
            d.pop("wall_ms")
        recs.append(d)
    out = {
        "spec": asdict(spec),
        "summary": [asdict(s) for s in aggregate(records)],
        "records": recs,
        "notes": {GREEDY: "not implemented; reported as unavailable"},
    }
    return json.dumps(_jsonable(out), indent=1, sort_keys=True)


def doctor(spec: SweepSpec) -> List[Tuple[str, float, int, str]]:
    """Dimension-level feasibility of every (scheme, point), without trials."""
    out = []
    for scheme in spec.schemes:
        for snr, nb in spec.points():
            try:
                cfg = spec.base_config.at(snr, nb)
                reason = scheme_feasibility(scheme, cfg)
            except ModelError as exc:
                reason = f"invalid_dims ({exc})"
            out.append((scheme, snr, nb, reason or "ok"))
    return out
