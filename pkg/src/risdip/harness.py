"""
Monte-Carlo orchestration of estimator comparisons.

Every random quantity is drawn from a stream keyed by what it is for, so

* all estimators at a fixed ``(trial, snr)`` see the same channel and the
  same noise draws (paired comparisons),
* records of trial ``i`` do not depend on which other trials run,
* worker scheduling cannot change any number.
"""

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .config import ExperimentConfig
from .dip import denoise
from .estimators import (estimate_covariances, ls_grid, nmse, onoff_estimate,
                         unmix)
from .frame import (ImpairmentConfig, dft_pattern, kappa_from_bits,
                    onoff_pattern, pilot_plan, synth_received)
from .linalg import RngStream, derive_stream_id

__all__ = [
    "NmseRecord",
    "AggregateRow",
    "ExperimentResult",
    "TrialFailure",
    "noise_variance",
    "prepare_covariances",
    "run_trial",
    "run_experiment",
    "run_hwi_sweep",
    "aggregate",
    "paired_sign_test",
    "write_csv",
    "read_csv",
    "CSV_COLUMNS",
]

log = logging.getLogger(__name__)

CSV_COLUMNS = ("estimator", "snr_db", "user", "trial", "metric_mode", "nmse")


@dataclass(frozen=True)
class NmseRecord:
    estimator: str
    snr_db: float
    user: int
    trial: int
    metric_mode: str
    nmse: float

    @property
    def key(self):
        return (self.estimator, self.snr_db, self.user, self.trial, self.metric_mode)


@dataclass(frozen=True)
class AggregateRow:
    estimator: str
    snr_db: float
    metric_mode: str
    mean: float
    ci95: float
    count: int


class TrialFailure(RuntimeError):
    """A trial raised; the message names the trial, estimator and SNR."""


@dataclass
class ExperimentResult:
    records: list
    table: list

    def mean(self, estimator, snr_db, metric_mode="dg_block") -> float:
        for row in self.table:
            if (row.estimator, row.snr_db, row.metric_mode) == (estimator, snr_db, metric_mode):
                return row.mean
        raise KeyError((estimator, snr_db, metric_mode))

    def per_trial(self, estimator, snr_db, metric_mode="dg_block") -> np.ndarray:
        return _per_trial(self.records, estimator, snr_db, metric_mode)


def noise_variance(config: ExperimentConfig, model, snr_db: float) -> float:
    """
    Per-entry AWGN variance for an SNR point.

    ``snr_reference="received"`` (default) references the SNR to the mean
    effective-channel power at the BS; ``"transmit"`` uses the UE transmit
    power alone, leaving the pathloss inside the channel.
    """
    snr = 10.0 ** (snr_db / 10.0)
    if config.snr_reference == "transmit":
        return config.tx_power / snr
    ref = np.mean([model.expected_power(u) for u in range(config.n_users)])
    return float(ref / snr)


def prepare_covariances(config: ExperimentConfig, model=None):
    """Effective-channel covariances ``(U, T, N, K, K)`` used by LMMSE."""
    model = model or config.channel_model()
    pattern = dft_pattern(config.n_subsurfaces)
    if config.covariance == "analytic":
        phi = pattern.phases
        cov = np.stack([[model.analytic_covariance(u, phi[t]) for t in range(pattern.n_symbols)]
                        for u in range(config.n_users)])
        return np.broadcast_to(cov[:, :, None], cov.shape[:2] + (config.n_subcarriers,)
                               + cov.shape[2:])
    rng = RngStream.for_keys(config.seed, "covariance")
    return estimate_covariances(model, config.n_subcarriers, pattern,
                                config.covariance_trials, rng)


def _dip_config(config, trial, snr_db, u):
    seed = derive_stream_id(config.seed, config.dip.seed, "dip", trial, repr(float(snr_db)), u)
    return replace(config.dip, seed=seed)


def run_trial(config: ExperimentConfig, trial: int, model=None, cov=None,
              impairments: ImpairmentConfig = None, suffix: str = "") -> list:
    """All records of one trial: every SNR, estimator, user and metric mode."""
    model = model or config.channel_model()
    impairments = config.impairment_config() if impairments is None else impairments
    plan = pilot_plan(config.n_subcarriers, config.n_pilots, config.n_users, config.zc_root)
    pat_dft = dft_pattern(config.n_subsurfaces)
    pat_onoff = onoff_pattern(config.n_subsurfaces)
    real = model.draw(config.n_subcarriers, RngStream.for_keys(config.seed, "channel", trial))
    ests = config.estimators
    records = []

    for snr_db in config.snr_db:
        current = None
        try:
            noise_var = noise_variance(config, model, snr_db)
            noise_key = ("frame", trial, repr(float(snr_db)))
            frame = synth_received(real, plan, pat_dft, noise_var, impairments,
                                   RngStream.for_keys(config.seed, *noise_key))
            frame_onoff = None
            if "onoff" in ests:
                frame_onoff = synth_received(real, plan, pat_onoff, noise_var, impairments,
                                             RngStream.for_keys(config.seed, *noise_key))
            for u in range(config.n_users):
                truth = real.stacked(u)
                results = {}
                if "onoff" in ests:
                    current = "onoff"
                    est = onoff_estimate(frame_onoff, u, config.interpolation)
                    grid = ls_grid(frame_onoff, u, method=config.interpolation).values
                    results["onoff"] = (est, grid, frame_onoff)
                if "ls" in ests or "dip" in ests:
                    current = "ls"
                    grid = ls_grid(frame, u, method=config.interpolation)
                    if "ls" in ests:
                        results["ls"] = (unmix(grid, pat_dft), grid.values, frame)
                    if "dip" in ests:
                        current = "dip"
                        den = denoise(grid, _dip_config(config, trial, snr_db, u))
                        results["dip"] = (unmix(den, pat_dft), den.values, frame)
                if "lmmse" in ests:
                    current = "lmmse"
                    grid = ls_grid(frame, u, method=config.interpolation, cov=cov,
                                   snr=1.0 / noise_var if noise_var > 0 else 1e300,
                                   kappa_ue=impairments.kappa_ue,
                                   kappa_bs=impairments.kappa_bs)
                    results["lmmse"] = (unmix(grid, pat_dft), grid.values, frame)
                for name in ests:
                    est, grid, fr = results[name]
                    for mode in config.metric_modes:
                        if mode == "dg_block":
                            value = nmse(truth, est.stacked)
                        else:
                            value = nmse(np.moveaxis(fr.h_actual[u], 0, -1), grid)
                        records.append(NmseRecord(name + suffix, float(snr_db), u, trial,
                                                  mode, value))
        except Exception as exc:
            raise TrialFailure(f"trial {trial}, estimator {current}, snr {snr_db} dB: "
                               f"{type(exc).__name__}: {exc}") from exc
    return records


def _trial_worker(args):
    return run_trial(*args)


def _run_trials(config, model, cov, impairments, suffix, workers):
    jobs = [(config, i, model, cov, impairments, suffix) for i in range(config.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_trial_worker, jobs))
    else:
        chunks = [_trial_worker(j) for j in jobs]
    return [r for chunk in chunks for r in chunk]


def _sorted(records):
    return sorted(records, key=lambda r: (r.estimator, r.snr_db, r.metric_mode, r.trial, r.user))


def run_experiment(config: ExperimentConfig, workers: int = 1, cov=None) -> ExperimentResult:
    """
    Run ``config.trials`` paired trials over all SNR points and estimators.

    ``cov`` may carry precomputed LMMSE covariances; otherwise they are
    estimated once up front.
    """
    model = config.channel_model()
    if cov is None and "lmmse" in config.estimators:
        cov = prepare_covariances(config, model)
    records = _sorted(_run_trials(config, model, cov, None, "", workers))
    return ExperimentResult(records, aggregate(records))


def run_hwi_sweep(config: ExperimentConfig, bits, workers: int = 1,
                  include_ideal: bool = True) -> ExperimentResult:
    """
    Repeat the experiment for ``kappa = kappa_from_bits(b)`` at both UE and BS.

    Estimator names get a ``@b<bits>`` suffix, the hardware-ideal baseline
    ``@ideal``. Phase noise follows ``config.phase_noise`` for every
    impaired setting. Draws are matched across settings.
    """
    bits = list(bits)
    if not bits:
        raise ValueError("bit_list must not be empty")
    model = config.channel_model()
    cov = None
    if "lmmse" in config.estimators:
        cov = prepare_covariances(config, model)
    records = []
    if include_ideal:
        records += _run_trials(config, model, cov, ImpairmentConfig(), "@ideal", workers)
    for b in bits:
        k = kappa_from_bits(b)
        imp = ImpairmentConfig(k, k, config.phase_noise, config.phase_noise_mode,
                               config.ue_distortion_scope)
        records += _run_trials(config, model, cov, imp, f"@b{b}", workers)
    records = _sorted(records)
    return ExperimentResult(records, aggregate(records))


def aggregate(records) -> list:
    """Mean and normal-approximation 95% half-width per (estimator, SNR, mode)."""
    groups = {}
    for r in records:
        groups.setdefault((r.estimator, r.snr_db, r.metric_mode), []).append(r.nmse)
    rows = []
    for (est, snr, mode), vals in sorted(groups.items()):
        v = np.asarray(vals)
        ci = 1.96 * v.std(ddof=1) / np.sqrt(v.size) if v.size > 1 else float("nan")
        rows.append(AggregateRow(est, snr, mode, float(v.mean()), float(ci), int(v.size)))
    return rows


def _per_trial(records, estimator, snr_db, metric_mode):
    by_trial = {}
    for r in records:
        if r.estimator == estimator and r.snr_db == snr_db and r.metric_mode == metric_mode:
            by_trial.setdefault(r.trial, []).append(r.nmse)
    if not by_trial:
        raise KeyError((estimator, snr_db, metric_mode))
    return np.array([np.mean(by_trial[t]) for t in sorted(by_trial)])


@dataclass(frozen=True)
class SignTestResult:
    wins: int
    n: int
    p_value: float
    mean_better: float
    mean_worse: float

    @property
    def significant(self) -> bool:
        return self.p_value < 0.05 and self.mean_better < self.mean_worse


def paired_sign_test(records, better: str, worse: str, snr_db: float,
                     metric_mode: str = "dg_block") -> SignTestResult:
    """
    One-sided paired sign test that ``better`` has lower per-trial NMSE.

    Per-trial values are averaged over users before pairing.
    """
    a = _per_trial(records, better, snr_db, metric_mode)
    b = _per_trial(records, worse, snr_db, metric_mode)
    diff = a - b
    wins = int(np.sum(diff < 0))
    n = int(np.sum(diff != 0))
    p = stats.binomtest(wins, n, 0.5, alternative="greater").pvalue if n else 1.0
    return SignTestResult(wins, n, float(p), float(a.mean()), float(b.mean()))


def write_csv(records, path):
    """Write records (sorted) with the fixed column set and LF line endings."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in _sorted(records):
            w.writerow([r.estimator, repr(r.snr_db), r.user, r.trial, r.metric_mode, repr(r.nmse)])


def read_csv(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected header")
    return [NmseRecord(e, float(s), int(u), int(t), m, float(v)) for e, s, u, t, m, v in rows[1:]]
