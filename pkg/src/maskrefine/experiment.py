"""Simulated evaluation: scenario -> mixture -> corrupted oracle masks ->
all six pipeline variants -> AUC and SI-SNR rows."""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import MaskRefineError
from .masks import corrupt_mask, oracle_mask
from .metrics import auc, averaged_roc, ideal_binary_mask, roc, si_snr
from .pipeline import VARIANTS, PipelineConfig, process
from .roomsim import sample_scenario, simulate
from .signal import istft, stft

__all__ = ["ExperimentConfig", "TrialResult", "trial_seed", "run_trial", "run_experiment",
           "summarize", "METRIC_COLUMNS", "write_metrics_csv"]

log = logging.getLogger(__name__)

METRIC_COLUMNS = (
    "scenario_seed", "snr_db", "auc_prior", "auc_refined",
    "sisnr_in", "sisnr_out_sc", "sisnr_out_mc",
    # the remaining variants, after the fixed leading columns
    "sisnr_out_crm", "sisnr_out_crm_refined", "sisnr_out_sc_norefine", "sisnr_out_mc_norefine",
)

_VARIANT_COLUMN = {
    ("sc", True): "sisnr_out_sc",
    ("mc", True): "sisnr_out_mc",
    ("crm", False): "sisnr_out_crm",
    ("crm", True): "sisnr_out_crm_refined",
    ("sc", False): "sisnr_out_sc_norefine",
    ("mc", False): "sisnr_out_mc_norefine",
}


@dataclass(frozen=True)
class ExperimentConfig:
    trials: int = 20
    snr_db: tuple = (-5.0, 0.0, 5.0, 10.0)
    seed: int = 0
    corruption: float = 1.0
    duration_s: float = 2.0
    jobs: int = 1
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)


@dataclass
class TrialResult:
    row: dict
    roc_prior: object
    roc_refined: object


def trial_seed(master_seed, index):
    """Per-trial scenario seed; independent of scheduling."""
    return int(np.random.SeedSequence([int(master_seed), int(index)]).generate_state(1)[0])


def _snr_key(snr_db):
    return int(round((snr_db + 1000.0) * 1000.0))


def run_trial(seed, snr_db, corruption=1.0, config=None, duration_s=2.0):
    config = config or PipelineConfig()
    scen = sample_scenario(seed, snr_db=snr_db, duration_s=duration_s)
    mix, _, _ = simulate(scen, config.reference_channel)
    fs = scen.sample_rate
    params = config.stft_params(fs)
    Y, S, N = (stft(w, **params) for w in (mix.y, mix.s_img, mix.n_img))
    gamma = oracle_mask(S, N)
    prior = corrupt_mask(gamma, corruption, np.random.SeedSequence([seed, _snr_key(snr_db), 7]))
    ref = config.reference_channel
    out = process(Y, prior, config, scen.geometry, VARIANTS, crm_mask=prior[:, :, ref],
                  sample_rate=fs)

    # the first and last frames are only partially overlapped
    labels = ideal_binary_mask(S.bins[1:-1, :, ref], N.bins[1:-1, :, ref])
    roc_prior = roc(out["alpha_s"][1:-1], labels)
    roc_refined = roc(out["lambda_s"][1:-1], labels)

    T = Y.n_frames
    region = slice(params["window_length"], (T - 1) * params["hop"])
    target = mix.s_img.samples[ref, region]
    row = {
        "scenario_seed": seed,
        "snr_db": float(snr_db),
        "auc_prior": auc(roc_prior),
        "auc_refined": auc(roc_refined),
        "sisnr_in": si_snr(mix.y.samples[ref, region], target),
    }
    for variant, column in _VARIANT_COLUMN.items():
        est = istft(Y.with_bins(out[variant])).samples[0, region]
        row[column] = si_snr(est, target)
    return TrialResult({k: row[k] for k in METRIC_COLUMNS}, roc_prior, roc_refined)


def _run_task(task):
    index, seed, snr, corruption, config, duration = task
    try:
        return run_trial(seed, snr, corruption, config, duration)
    except MaskRefineError as exc:
        raise type(exc)(f"trial {index} (seed {seed}, snr {snr:+g} dB): {exc}") from exc


def run_experiment(cfg):
    """Run every (snr, trial) pair; results are ordered by SNR then trial."""
    tasks = [
        (i, trial_seed(cfg.seed, i), float(snr), cfg.corruption, cfg.pipeline, cfg.duration_s)
        for snr in cfg.snr_db for i in range(cfg.trials)
    ]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = []
        for k, task in enumerate(tasks):
            log.info("trial %d/%d (seed %d, snr %+.1f dB)", k + 1, len(tasks), task[1], task[2])
            results.append(_run_task(task))
    return results


def summarize(results, snr_list):
    """Per-SNR means of every numeric column and averaged ROC curves."""
    summary = []
    for snr in snr_list:
        sel = [r for r in results if r.row["snr_db"] == float(snr)]
        mean = {"scenario_seed": "mean", "snr_db": float(snr)}
        for col in METRIC_COLUMNS[2:]:
            mean[col] = float(np.mean([r.row[col] for r in sel]))
        summary.append((mean,
                        averaged_roc([r.roc_prior for r in sel]),
                        averaged_roc([r.roc_refined for r in sel])))
    return summary


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_metrics_csv(path, rows):
    with open(path, "w") as fh:
        fh.write(",".join(METRIC_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_cell(row[c]) for c in METRIC_COLUMNS) + "\n")
