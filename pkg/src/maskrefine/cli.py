"""Command-line entry point: ``maskrefine {enhance,experiment,simulate}``.

Settings are resolved in three layers: command-line flags override values
from ``--config FILE`` (``key = value`` lines with dotted keys such as
``em.iterations``), which override the built-in defaults.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
import argparse
import logging
import os
import sys

import numpy as np

from .cgmm import write_loglik_csv
from .errors import DataError, MaskRefineError, NumericalError
from .experiment import ExperimentConfig, run_experiment, summarize, write_metrics_csv
from .masks import apply_complex_mask, energetic_mask, read_mask_file, write_mask_file
from .metrics import write_roc_csv
from .pipeline import PipelineConfig, process
from .roomsim import nested_array_geometry, parse_key_values, read_scenario, sample_scenario
from .roomsim import simulate, write_scenario
from .signal import Waveform, istft, read_wav, stft, write_wav

log = logging.getLogger("maskrefine")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

MODE_ALIASES = {"crm": "crm", "sc": "sc", "sc-wiener": "sc", "mc": "mc"}


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return tuple(float(x) for x in str(text).replace(",", " ").split())


def _paths(text):
    return tuple(p.strip() for p in str(text).split(",") if p.strip())


def _opt_str(text):
    return str(text) if str(text) else None


def _mode(text):
    try:
        return MODE_ALIASES[str(text).strip()]
    except KeyError:
        raise ValueError(f"unknown mode {text!r} (choose from crm, sc, mc)") from None


def _mode_flag(text):
    # argparse checks ``choices`` after conversion, so unknown names pass through
    return MODE_ALIASES.get(text, text)


# key -> (default, parser for config-file text)
SETTINGS = {
    "stft.fft_size": (512, int),
    "stft.window_ms": (32.0, float),
    "stft.hop_fraction": (0.5, float),
    "em.iterations": (20, int),
    "em.rank1": (False, _bool),
    "em.loading": (1e-6, float),
    "beamform.reference_channel": (0, int),
    "beamform.gain_floor": (0.0, float),
    "beamform.band_split_hz": (1000.0, float),
    "beamform.subarray": (True, _bool),
    "enhance.mode": ("mc", _mode),
    "enhance.skip_refinement": (False, _bool),
    "experiment.trials": (20, int),
    "experiment.snr_db": ((-5.0, 0.0, 5.0, 10.0), _floats),
    "experiment.seed": (0, int),
    "experiment.corruption": (1.0, float),
    "experiment.duration_s": (2.0, float),
    "experiment.jobs": (1, int),
    "simulate.scenario": (None, _opt_str),
    "paths.input": (None, _opt_str),
    "paths.masks": ((), _paths),
    "paths.output": (None, _opt_str),
    "paths.out_dir": (".", str),
    "paths.dump_mask": (None, _opt_str),
    "paths.loglik_csv": (None, _opt_str),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse reports usage errors with exit status 2 by default; this
    program reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config(path):
    """Parse a config file into typed settings (only the keys it sets)."""
    try:
        with open(path) as fh:
            raw = parse_key_values(fh.read(), str(path))
    except OSError as exc:
        raise DataError(f"cannot read config file: {exc}") from None
    out = {}
    for key, text in raw.items():
        if key not in SETTINGS:
            raise DataError(f"{path}: unknown config key {key!r}")
        try:
            out[key] = SETTINGS[key][1](text)
        except ValueError as exc:
            raise DataError(f"{path}: bad value for {key}: {exc}") from None
    return out


def resolve_settings(args):
    """defaults < config file < command-line flags."""
    settings = {k: v[0] for k, v in SETTINGS.items()}
    if getattr(args, "config", None):
        settings.update(read_config(args.config))
    for key in SETTINGS:
        v = getattr(args, key, None)
        if v is not None:
            settings[key] = v
    return settings


def pipeline_config(s):
    return PipelineConfig(
        fft_size=s["stft.fft_size"],
        window_ms=s["stft.window_ms"],
        hop_fraction=s["stft.hop_fraction"],
        em_iterations=s["em.iterations"],
        rank1=s["em.rank1"],
        loading=s["em.loading"],
        reference_channel=s["beamform.reference_channel"],
        gain_floor=s["beamform.gain_floor"],
        band_split_hz=s["beamform.band_split_hz"],
        subarray=s["beamform.subarray"],
    )


def experiment_config(s):
    if s["experiment.trials"] < 1:
        raise UsageError("--trials must be at least 1")
    if s["experiment.jobs"] < 1:
        raise UsageError("--jobs must be at least 1")
    return ExperimentConfig(
        trials=s["experiment.trials"],
        snr_db=tuple(float(x) for x in s["experiment.snr_db"]),
        seed=s["experiment.seed"],
        corruption=s["experiment.corruption"],
        duration_s=s["experiment.duration_s"],
        jobs=s["experiment.jobs"],
        pipeline=pipeline_config(s),
    )


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _load_masks(paths, Y, ref):
    """Return (prior, crm_mask): prior is T x F x M or pooled T x F."""
    if not paths:
        raise UsageError("enhance needs at least one --mask file")
    parts = [read_mask_file(p) for p in paths]
    T, F, M = Y.bins.shape
    for p, m in zip(paths, parts):
        if m.shape[:2] != (T, F):
            raise DataError(f"{p}: mask is {m.shape[0]} x {m.shape[1]} but the input STFT is "
                            f"{T} x {F}")
    kinds = {np.iscomplexobj(m) for m in parts}
    if len(kinds) > 1:
        raise DataError("mask files mix real and complex data")
    masks = np.concatenate(parts, axis=2)
    if masks.shape[2] == M:
        channels = Y.bins
    elif masks.shape[2] == 1:
        channels = Y.bins[:, :, ref:ref + 1]
    else:
        raise DataError(f"got masks for {masks.shape[2]} channels; the input has {M} "
                        "(give one mask per channel or one pooled mask)")
    if np.iscomplexobj(masks):
        H = masks.astype(np.complex128)
        gamma = energetic_mask(channels, apply_complex_mask(channels, H))
        crm = H[:, :, ref] if H.shape[2] == M else H[:, :, 0]
    else:
        gamma = masks.astype(np.float64)
        if not np.all(np.isfinite(gamma)) or gamma.min() < 0 or gamma.max() > 1:
            raise DataError("real masks must lie in [0, 1]")
        crm = None
    prior = gamma if gamma.shape[2] == M else gamma[:, :, 0]
    return prior, crm


def cmd_enhance(s):
    if not s["paths.input"] or not s["paths.output"]:
        raise UsageError("enhance needs --input and --output")
    config = pipeline_config(s)
    mode, refine_flag = s["enhance.mode"], not s["enhance.skip_refinement"]
    wav = read_wav(s["paths.input"])
    fs = wav.sample_rate
    Y = stft(wav, **config.stft_params(fs))
    ref = config.reference_channel
    if not 0 <= ref < wav.n_channels:
        raise DataError(f"reference channel {ref} out of range for {wav.n_channels} channels")
    prior, crm = _load_masks(s["paths.masks"], Y, ref)
    if mode == "crm" and not refine_flag and crm is None:
        raise DataError("crm mode without refinement needs complex masks")
    if config.subarray and wav.n_channels != nested_array_geometry().n_mics:
        raise DataError(f"sub-array processing expects {nested_array_geometry().n_mics} channels, "
                        f"input has {wav.n_channels}; use --subarray off")
    log.info("enhancing %s: %d channels, %d frames, mode %s%s", s["paths.input"],
             wav.n_channels, Y.n_frames, mode, "" if refine_flag else " (no refinement)")
    out = process(Y, prior, config, variants=[(mode, refine_flag)], crm_mask=crm,
                  sample_rate=fs)
    enhanced = istft(Y.with_bins(out[(mode, refine_flag)][:, :, None])).samples[0]
    samples = np.zeros((1, wav.n_samples))
    samples[0, :enhanced.size] = enhanced
    write_wav(s["paths.output"], Waveform(samples, fs))
    if s["paths.dump_mask"]:
        lam = out["lambda_s"] if refine_flag else out["alpha_s"]
        write_mask_file(s["paths.dump_mask"], lam)
    if s["paths.loglik_csv"]:
        if not refine_flag:
            raise UsageError("--loglik-csv needs refinement (drop --skip-refinement)")
        write_loglik_csv(s["paths.loglik_csv"], out["loglik"])
    return EXIT_OK


def _snr_tag(snr):
    return f"{snr:+g}".replace(".", "p")


def cmd_experiment(s):
    cfg = experiment_config(s)
    out_dir = s["paths.out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    results = run_experiment(cfg)
    summary = summarize(results, cfg.snr_db)
    rows = [r.row for r in results] + [m for m, _, _ in summary]
    write_metrics_csv(os.path.join(out_dir, "metrics.csv"), rows)
    for (mean, roc_prior, roc_refined), snr in zip(summary, cfg.snr_db):
        tag = _snr_tag(snr)
        write_roc_csv(os.path.join(out_dir, f"roc_prior_snr{tag}.csv"), roc_prior)
        write_roc_csv(os.path.join(out_dir, f"roc_refined_snr{tag}.csv"), roc_refined)
        print(f"snr {snr:+g} dB: auc prior {mean['auc_prior']:.4f} refined "
              f"{mean['auc_refined']:.4f} | si-snr in {mean['sisnr_in']:.2f} "
              f"sc {mean['sisnr_out_sc']:.2f} mc {mean['sisnr_out_mc']:.2f} dB")
    return EXIT_OK


def cmd_simulate(s):
    out_dir = s["paths.out_dir"]
    if s["simulate.scenario"]:
        scen = read_scenario(s["simulate.scenario"])
    else:
        snrs = s["experiment.snr_db"]
        if len(snrs) != 1:
            raise UsageError("simulate takes a single --snr-db value")
        scen = sample_scenario(s["experiment.seed"], snr_db=snrs[0],
                               duration_s=s["experiment.duration_s"])
    os.makedirs(out_dir, exist_ok=True)
    mix, h_s, h_n = simulate(scen, s["beamform.reference_channel"])
    fs = scen.sample_rate
    # the written mixture is the float32 sum of the written components
    s32 = mix.s_img.samples.astype(np.float32)
    n32 = mix.n_img.samples.astype(np.float32)
    for name, x in (("y", s32 + n32), ("s_img", s32), ("n_img", n32),
                    ("rir_speech", h_s), ("rir_noise", h_n)):
        write_wav(os.path.join(out_dir, f"{name}.wav"), Waveform(np.asarray(x, np.float64), fs))
    write_scenario(os.path.join(out_dir, "scenario.txt"), scen)
    print(os.path.join(out_dir, "scenario.txt"))
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _on_off(text):
    try:
        return _bool(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected on or off") from None


def _common(p):
    # every flag defaults to None so unset flags never mask config-file values
    p.add_argument("--config", metavar="PATH", help="key = value settings file")
    p.add_argument("--seed", dest="experiment.seed", type=int)
    p.add_argument("--em-iters", dest="em.iterations", type=int, metavar="N")
    p.add_argument("--no-rank1", dest="em.rank1", action="store_const", const=False,
                   help="full-rank speech covariance (the default)")
    p.add_argument("--rank1", dest="em.rank1", action="store_const", const=True,
                   help="rank-1 speech covariance after every M-step")
    p.add_argument("--subarray", dest="beamform.subarray", type=_on_off, metavar="{on,off}")
    p.add_argument("--reference-channel", dest="beamform.reference_channel", type=int)
    p.add_argument("--gain-floor", dest="beamform.gain_floor", type=float)
    p.add_argument("--out", dest="paths.out_dir", metavar="DIR")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="maskrefine", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="{enhance,experiment,simulate}",
                                parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("enhance", help="enhance a multichannel WAV with DNN masks")
    _common(p)
    p.add_argument("--input", dest="paths.input", metavar="WAV")
    p.add_argument("--mask", dest="paths.masks", action="append", metavar="MCMF",
                   help="mask file; repeat once per channel, or give one pooled mask")
    p.add_argument("--output", dest="paths.output", metavar="WAV")
    p.add_argument("--mode", dest="enhance.mode", type=_mode_flag,
                   choices=sorted(set(MODE_ALIASES.values())), metavar="{crm,mc,sc,sc-wiener}",
                   help="filter: complex mask, MVDR+post-gain (default), or sqrt-mask gain")
    p.add_argument("--skip-refinement", dest="enhance.skip_refinement", action="store_const",
                   const=True)
    p.add_argument("--dump-mask", dest="paths.dump_mask", metavar="MCMF")
    p.add_argument("--loglik-csv", dest="paths.loglik_csv", metavar="CSV")

    p = sub.add_parser("experiment", help="run simulated trials and write metric CSVs")
    _common(p)
    p.add_argument("--snr-db", dest="experiment.snr_db", type=float, nargs="+", metavar="X")
    p.add_argument("--trials", dest="experiment.trials", type=int, metavar="N")
    p.add_argument("--corruption", dest="experiment.corruption", type=float, metavar="STD")
    p.add_argument("--duration", dest="experiment.duration_s", type=float, metavar="SEC")
    p.add_argument("--jobs", dest="experiment.jobs", type=int, metavar="N")

    p = sub.add_parser("simulate", help="synthesize one scenario and write WAVs")
    _common(p)
    p.add_argument("--snr-db", dest="experiment.snr_db", type=float, nargs=1, metavar="X")
    p.add_argument("--duration", dest="experiment.duration_s", type=float, metavar="SEC")
    p.add_argument("--scenario", dest="simulate.scenario", metavar="PATH",
                   help="re-create a scenario file written by an earlier run")
    return parser


COMMANDS = {"enhance": cmd_enhance, "experiment": cmd_experiment, "simulate": cmd_simulate}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        settings = resolve_settings(args)
        return COMMANDS[args.command](settings)
    except UsageError as exc:
        print(f"maskrefine {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"maskrefine: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, OSError) as exc:
        print(f"maskrefine: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MaskRefineError as exc:
        print(f"maskrefine: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
