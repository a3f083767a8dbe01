"""Synthetic multichannel scenes: image-source RIRs in a shoebox room, a
nested linear microphone array, synthetic speech/noise sources and
SNR-controlled mixing."""
import math
from functools import lru_cache
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import fftconvolve

from . import kernels
from .errors import DataError
from .signal import Waveform

__all__ = [
    "SPEED_OF_SOUND",
    "ArrayGeometry",
    "nested_array_geometry",
    "ScenarioRanges",
    "Scenario",
    "sample_scenario",
    "eyring_reflection",
    "calibrate_reflection",
    "image_source_rir",
    "Mixture",
    "mix_at_snr",
    "synth_speech",
    "synth_noise",
    "simulate",
    "schroeder_rt60",
    "read_scenario",
    "write_scenario",
]

SPEED_OF_SOUND = 343.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Linear array along the room x axis.

    offsets: element positions along the array axis [m]
    small_subarray / large_subarray: element indices of each sub-array
    """

    offsets: tuple
    small_subarray: tuple = ()
    large_subarray: tuple = ()

    @property
    def n_mics(self):
        return len(self.offsets)

    def positions(self, center):
        off = np.asarray(self.offsets, dtype=np.float64)
        off = off - 0.5 * (off.min() + off.max())
        pos = np.tile(np.asarray(center, dtype=np.float64), (len(off), 1))
        pos[:, 0] += off
        return pos


def nested_array_geometry():
    """Six elements; 4-element sub-arrays with 5 cm and 15 cm spacing sharing
    the elements at 0 and 0.15 m."""
    return ArrayGeometry(
        offsets=(0.0, 0.05, 0.10, 0.15, 0.30, 0.45),
        small_subarray=(0, 1, 2, 3),
        large_subarray=(0, 3, 4, 5),
    )


@dataclass(frozen=True)
class ScenarioRanges:
    room_min: tuple = (7.0, 5.0, 3.0)
    room_max: tuple = (8.0, 6.0, 4.0)
    rt60: tuple = (0.2, 0.5)
    source_distance: float = 1.0
    # array centre keeps this clearance from the walls (x, y); z range below
    array_margin: float = 1.5
    array_height: tuple = (1.2, 1.8)
    noise_min_distance: float = 1.0
    noise_wall_margin: float = 0.5
    noise_height: tuple = (1.0, 2.0)
    max_tries: int = 100


@dataclass(frozen=True)
class Scenario:
    room_dims: tuple
    rt60: float
    source_azimuth_deg: float
    array_center: tuple
    noise_pos: tuple
    snr_db: float = 0.0
    seed: int = 0
    sample_rate: int = 16000
    duration_s: float = 2.0
    source_distance: float = 1.0
    geometry: ArrayGeometry = field(default_factory=nested_array_geometry)

    @property
    def source_pos(self):
        az = math.radians(self.source_azimuth_deg)
        c = np.asarray(self.array_center, dtype=np.float64)
        return c + self.source_distance * np.array([math.cos(az), math.sin(az), 0.0])

    @property
    def mic_positions(self):
        return self.geometry.positions(self.array_center)

    def validate(self):
        room = np.asarray(self.room_dims)
        pts = [self.source_pos, np.asarray(self.noise_pos)] + list(self.mic_positions)
        for p in pts:
            if np.any(p <= 0) or np.any(p >= room):
                raise DataError(f"position {np.round(p, 3).tolist()} is outside the room {self.room_dims}")
        if self.rt60 <= 0:
            raise DataError("rt60 must be positive")
        return self


def _inside(p, room, margin=0.0):
    return bool(np.all(p > margin) and np.all(p < np.asarray(room) - margin))


def _place(room, seed, ranges, azimuth=None):
    """Array centre, source azimuth and noise position for a given room.

    Uses its own random stream derived from ``seed`` so that a scenario file
    carrying only the room and azimuth reproduces the same placement.
    """
    rng = np.random.default_rng([seed, 1])
    room = np.asarray(room, dtype=np.float64)
    for _ in range(ranges.max_tries):
        center = np.array([
            rng.uniform(ranges.array_margin, room[0] - ranges.array_margin),
            rng.uniform(ranges.array_margin, room[1] - ranges.array_margin),
            rng.uniform(*ranges.array_height),
        ])
        az = rng.uniform(0.0, 360.0)
        if azimuth is not None:
            az = azimuth
        src = center + ranges.source_distance * np.array(
            [math.cos(math.radians(az)), math.sin(math.radians(az)), 0.0])
        if not (_inside(center, room, 0.3) and _inside(src, room, 0.1)):
            continue
        for _ in range(ranges.max_tries):
            noise = np.array([
                rng.uniform(ranges.noise_wall_margin, room[0] - ranges.noise_wall_margin),
                rng.uniform(ranges.noise_wall_margin, room[1] - ranges.noise_wall_margin),
                rng.uniform(*ranges.noise_height),
            ])
            if np.linalg.norm(noise - center) >= ranges.noise_min_distance and _inside(noise, room):
                return tuple(center), float(az), tuple(noise)
    raise DataError(f"could not place array and sources in room {tuple(room)} "
                    f"after {ranges.max_tries} attempts")


def sample_scenario(seed, ranges=None, snr_db=0.0, sample_rate=16000, duration_s=2.0):
    """Draw a random room, RT60 and source placement, deterministically from ``seed``."""
    ranges = ranges or ScenarioRanges()
    rng = np.random.default_rng([seed, 0])
    room = tuple(float(v) for v in rng.uniform(ranges.room_min, ranges.room_max))
    rt60 = float(rng.uniform(*ranges.rt60))
    center, az, noise = _place(room, seed, ranges)
    return Scenario(room, rt60, az, center, noise, float(snr_db), int(seed), int(sample_rate),
                    float(duration_s), ranges.source_distance).validate()


def eyring_reflection(room_dims, rt60, c=SPEED_OF_SOUND):
    """Uniform wall reflection coefficient giving ``rt60`` by Eyring's formula."""
    lx, ly, lz = room_dims
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + lx * lz + ly * lz)
    absorption = 1.0 - math.exp(-24.0 * math.log(10.0) * volume / (c * surface * rt60))
    return math.sqrt(max(1.0 - absorption, 0.0))


def _image_sources(src, room, max_dist):
    room = np.asarray(room, dtype=np.float64)
    n = np.ceil(max_dist / (2.0 * room)).astype(int) + 1
    grids = np.meshgrid(*(np.arange(-k, k + 1) for k in n), indexing="ij")
    lattice = np.stack([g.ravel() for g in grids], axis=1)
    parity = np.array([[a, b, c] for a in (0, 1) for b in (0, 1) for c in (0, 1)])
    m = np.repeat(lattice, 8, axis=0)
    q = np.tile(parity, (len(lattice), 1))
    pos = (1 - 2 * q) * np.asarray(src)[None, :] + 2 * m * room[None, :]
    order = (np.abs(m - q) + np.abs(m)).sum(axis=1).astype(np.float64)
    return pos, order


def _rir(mics, src, room, fs, length, beta, half_width):
    reach = (length + half_width) * SPEED_OF_SOUND / fs
    images, order = _image_sources(src, room, reach)
    spread = np.max(np.linalg.norm(mics - mics.mean(axis=0), axis=1))
    near = np.linalg.norm(images - mics.mean(axis=0), axis=1) <= reach + spread
    return kernels.image_source_accumulate(images[near], order[near], mics, beta, fs,
                                           SPEED_OF_SOUND, length, half_width)


@lru_cache(maxsize=64)
def calibrate_reflection(room_dims, rt60, fs, probe_src, probe_mic, tol=0.02, max_iter=8):
    """Wall reflection coefficient whose simulated RIR decays at ``rt60``.

    Starts from the Eyring value (which overestimates the decay time of
    specular shoebox responses) and rescales log(beta) by the ratio of the
    measured to the requested decay time until they agree within ``tol``.
    """
    beta = eyring_reflection(room_dims, rt60)
    length = int(math.ceil(rt60 * fs))
    mic = np.asarray(probe_mic, dtype=np.float64)[None, :]
    for _ in range(max_iter):
        h = _rir(mic, np.asarray(probe_src), room_dims, fs, length, beta, 8)[0]
        measured = schroeder_rt60(h, fs)
        if abs(measured / rt60 - 1.0) < tol:
            break
        beta = math.exp(math.log(beta) * measured / rt60)
    return beta


def image_source_rir(scenario, source_pos, length=None, reflection=None, half_width=8):
    """Impulse responses (M x length) from ``source_pos`` to every microphone.

    Wall reflection defaults to ``calibrate_reflection`` for the scenario
    RT60 and the length to ceil(rt60 * fs) samples. Fractional delays use a
    Hann-windowed sinc of +/- ``half_width`` taps.
    """
    fs = scenario.sample_rate
    if length is None:
        length = int(math.ceil(scenario.rt60 * fs))
    src = np.asarray(source_pos, dtype=np.float64)
    if not _inside(src, scenario.room_dims):
        raise DataError(f"source {src.tolist()} is outside the room")
    if reflection is None:
        reflection = calibrate_reflection(
            tuple(scenario.room_dims), float(scenario.rt60), fs,
            tuple(float(v) for v in scenario.source_pos), tuple(float(v) for v in scenario.array_center))
    return _rir(scenario.mic_positions, src, scenario.room_dims, fs, length, reflection, half_width)


def schroeder_rt60(h, fs, decay_db=(-5.0, -25.0)):
    """RT60 from a linear fit of the backward-integrated energy decay curve."""
    e = np.cumsum(h[::-1] ** 2)[::-1]
    edc = 10.0 * np.log10(e / e[0] + 1e-300)
    hi, lo = decay_db
    idx = np.nonzero((edc <= hi) & (edc >= lo))[0]
    if len(idx) < 2:
        raise DataError("energy decay curve does not span the fit range")
    t = idx / fs
    slope, _ = np.polyfit(t, edc[idx], 1)
    return -60.0 / slope


@dataclass(frozen=True)
class Mixture:
    """Mixture and its reverberant speech/noise images, each M x N."""

    y: Waveform
    s_img: Waveform
    n_img: Waveform


def _convolve(x, rirs, n):
    return np.stack([fftconvolve(x, h)[:n] for h in rirs])


def mix_at_snr(speech, noise, rirs_speech, rirs_noise, snr_db, reference_channel=0):
    """Convolve both sources with their RIRs and scale the noise so that the
    reverberant SNR at the reference microphone equals ``snr_db``."""
    if not np.isfinite(snr_db):
        raise DataError("snr_db must be finite")
    s = np.asarray(getattr(speech, "samples", speech), dtype=np.float64).reshape(-1)
    v = np.asarray(getattr(noise, "samples", noise), dtype=np.float64).reshape(-1)
    fs = getattr(speech, "sample_rate", 16000)
    n = len(s)
    if len(v) < n:
        raise DataError("noise signal is shorter than speech")
    s_img = _convolve(s, rirs_speech, n)
    n_img = _convolve(v[:n], rirs_noise, n)
    ps = np.mean(s_img[reference_channel] ** 2)
    pn = np.mean(n_img[reference_channel] ** 2)
    if ps <= 0 or pn <= 0:
        raise DataError("silent source: zero power at the reference microphone")
    n_img = n_img * math.sqrt(ps / (pn * 10.0 ** (snr_db / 10.0)))
    return Mixture(Waveform(s_img + n_img, fs), Waveform(s_img, fs), Waveform(n_img, fs))


# --------------------------------------------------------------------------
# synthetic sources
# --------------------------------------------------------------------------

def synth_speech(n, fs, rng):
    """Speech-like signal: syllables of formant-shaped harmonic complexes with
    gliding pitch, occasional fricative noise bursts, and pauses."""
    out = np.zeros(n)
    pos = int(rng.uniform(0.05, 0.2) * fs)
    while pos < n:
        seg = min(int(rng.uniform(0.12, 0.35) * fs), n - pos)
        t = np.arange(seg) / fs
        if rng.random() < 0.25:
            burst = rng.standard_normal(seg)
            spec = np.fft.rfft(burst)
            freqs = np.fft.rfftfreq(seg, 1.0 / fs)
            spec[freqs < rng.uniform(2000, 3500)] = 0.0
            x = np.fft.irfft(spec, n=seg) * 0.3
        else:
            f0 = rng.uniform(90, 220) * (1.0 + rng.uniform(-0.15, 0.15) * t / max(t[-1], 1e-9))
            phase = 2.0 * np.pi * np.cumsum(f0) / fs
            formants = [rng.uniform(300, 900), rng.uniform(900, 2500), rng.uniform(2300, 3600)]
            x = np.zeros(seg)
            for k in range(1, int(5000 / f0.max()) + 1):
                fk = k * f0.mean()
                env = sum(math.exp(-0.5 * ((fk - fm) / 120.0) ** 2) for fm in formants)
                amp = (env + 0.05) / math.sqrt(k)
                x += amp * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
        x *= np.hanning(seg) ** 0.5
        out[pos:pos + seg] += rng.uniform(0.3, 1.0) * x
        pos += seg + int(rng.uniform(0.03, 0.25) * fs)
    peak = np.max(np.abs(out))
    return out * (0.5 / peak) if peak > 0 else out


def synth_noise(n, fs, rng):
    """Stationary coloured noise with a random 1/f^slope power spectrum."""
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    slope = rng.uniform(0.5, 1.5)
    spec *= np.maximum(freqs, 50.0) ** (-slope / 2.0)
    x = np.fft.irfft(spec, n=n)
    return x * (0.3 / np.max(np.abs(x)))


def simulate(scenario, reference_channel=0):
    """Full synthetic mixture for a scenario: sources, RIRs and mixing."""
    scenario.validate()
    fs = scenario.sample_rate
    n = int(round(scenario.duration_s * fs))
    speech = synth_speech(n, fs, np.random.default_rng([scenario.seed, 2]))
    noise = synth_noise(n, fs, np.random.default_rng([scenario.seed, 3]))
    h_s = image_source_rir(scenario, scenario.source_pos)
    h_n = image_source_rir(scenario, scenario.noise_pos)
    mix = mix_at_snr(Waveform(speech, fs), Waveform(noise, fs), h_s, h_n,
                     scenario.snr_db, reference_channel)
    return mix, h_s, h_n


# --------------------------------------------------------------------------
# scenario files (key = value)
# --------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (tuple, list, np.ndarray)):
        return ", ".join(repr(float(x)) for x in v)
    return repr(v)


def write_scenario(path, scenario):
    keys = [
        ("room_dims", scenario.room_dims),
        ("rt60", float(scenario.rt60)),
        ("snr_db", float(scenario.snr_db)),
        ("seed", int(scenario.seed)),
        ("source_azimuth_deg", float(scenario.source_azimuth_deg)),
        ("sample_rate", int(scenario.sample_rate)),
        ("array_center", scenario.array_center),
        ("noise_pos", scenario.noise_pos),
        ("duration_s", float(scenario.duration_s)),
    ]
    with open(path, "w") as fh:
        for k, v in keys:
            fh.write(f"{k} = {_fmt(v)}\n")


def parse_key_values(text, source="<config>"):
    """Parse ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{source}:{lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise DataError(f"{source}:{lineno}: empty key")
        out[k] = v
    return out


def _floats(v, n=None, key=""):
    try:
        vals = tuple(float(x) for x in v.split(","))
    except ValueError:
        raise DataError(f"invalid value for {key}: {v!r}") from None
    if n is not None and len(vals) != n:
        raise DataError(f"{key} needs {n} values, got {len(vals)}")
    return vals


def read_scenario(path):
    with open(path) as fh:
        kv = parse_key_values(fh.read(), str(path))
    required = ("room_dims", "rt60", "snr_db", "seed", "source_azimuth_deg", "sample_rate")
    missing = [k for k in required if k not in kv]
    if missing:
        raise DataError(f"{path}: missing scenario keys {missing}")
    try:
        room = _floats(kv["room_dims"], 3, "room_dims")
        seed = int(kv["seed"])
        az = float(kv["source_azimuth_deg"])
        sc = Scenario(room, float(kv["rt60"]), az, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0),
                      float(kv["snr_db"]), seed, int(kv["sample_rate"]),
                      float(kv.get("duration_s", 2.0)))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if "array_center" in kv and "noise_pos" in kv:
        center = _floats(kv["array_center"], 3, "array_center")
        noise = _floats(kv["noise_pos"], 3, "noise_pos")
    else:
        center, _, noise = _place(room, seed, ScenarioRanges(), azimuth=az)
    return replace(sc, array_center=center, noise_pos=noise).validate()
