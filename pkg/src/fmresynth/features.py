"""Frame-synchronous audio features: f0 with confidence, A-weighted loudness.

The pitch estimator is a deterministic YIN variant (cumulative mean
normalized difference with parabolic interpolation); confidence is derived
from the CMNDF minimum. Loudness applies the analytic A-weighting curve to
Hann-windowed power spectra and is normalized so a full-scale 1 kHz sine
reads close to 0 dB.

All tracks share the same frame grid: frame t is centered at t * hop, and
T = len(audio) // hop.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

FEATURE_VERSION = 1

F0_MIN = 40.0
F0_MAX = 2000.0
YIN_THRESHOLD = 0.1
YIN_WINDOW = 1024          # integration window W
LOUDNESS_WINDOW = 1024
LOUDNESS_FLOOR_DB = -80.0


@dataclass(frozen=True)
class ConditioningSeq:
    """Normalized [T, 2] decoder input: pitch channel, loudness channel."""
    frames: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.frames, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError(f"conditioning must be [T, 2], got {arr.shape}")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("conditioning values outside [0, 1]")
        object.__setattr__(self, "frames", arr)


@dataclass(frozen=True)
class FeatureTrack:
    f0_hz: np.ndarray
    confidence: np.ndarray
    loudness_db: np.ndarray
    sample_rate: int = 16000
    hop: int = 64

    def __post_init__(self):
        if not (len(self.f0_hz) == len(self.confidence) == len(self.loudness_db)):
            raise ValueError("feature tracks must share one frame count")

    @property
    def frame_rate(self):
        return self.sample_rate / self.hop

    @property
    def n_frames(self):
        return len(self.f0_hz)


def _frame_centers(n_samples, hop):
    n_frames = n_samples // hop
    return np.arange(n_frames) * hop


def _centered_frames(audio, hop, window):
    """[T, window] frames centered on the hop grid, zero-padded at edges."""
    half = window // 2
    padded = np.pad(audio, (half, window))
    centers = _frame_centers(len(audio), hop)
    idx = centers[:, None] + np.arange(window)[None, :]
    return padded[idx]


def estimate_f0(audio, sample_rate=16000, hop=64):
    """Per-frame (f0_hz, confidence) via YIN.

    f0 is in [40, 2000] Hz, 0 for unvoiced frames; confidence lies in
    [0, 1] and grows with periodicity strength.
    """
    audio = np.asarray(audio, dtype=np.float64)
    if audio.size == 0:
        raise ValueError("empty audio")
    tau_max = int(sample_rate / F0_MIN)            # 400 @ 16 kHz
    tau_min = max(2, int(sample_rate / F0_MAX))    # 8 @ 16 kHz
    w = YIN_WINDOW
    seg_len = w + tau_max
    frames = _centered_frames(audio, hop, seg_len)  # [T, W + tau_max]
    n_frames = frames.shape[0]

    # difference function d(tau) = r0 + r_tau - 2 * xcorr(tau), vectorized
    # over frames via one rfft per frame
    nfft = 1
    while nfft < 2 * seg_len:
        nfft *= 2
    spec = np.fft.rfft(frames, nfft, axis=1)
    # energy of x[tau : tau + W] via cumulative sums
    sq = np.concatenate([np.zeros((n_frames, 1)), np.cumsum(frames ** 2, axis=1)],
                        axis=1)
    e0 = sq[:, w] - sq[:, 0]
    taus = np.arange(tau_max + 1)
    e_tau = sq[:, taus + w] - sq[:, taus]
    head = frames[:, :w]
    spec_head = np.fft.rfft(head, nfft, axis=1)
    xcorr = np.fft.irfft(np.conj(spec_head) * spec, nfft, axis=1)[:, :tau_max + 1]
    diff = e0[:, None] + e_tau - 2.0 * xcorr
    diff = np.maximum(diff, 0.0)

    # cumulative mean normalized difference
    cum = np.cumsum(diff[:, 1:], axis=1)
    cmndf = np.ones_like(diff)
    with np.errstate(invalid="ignore", divide="ignore"):
        cmndf[:, 1:] = diff[:, 1:] * taus[1:] / np.where(cum > 0, cum, np.inf)

    f0 = np.zeros(n_frames)
    conf = np.zeros(n_frames)
    rms = np.sqrt(np.mean(frames[:, :w] ** 2, axis=1))
    for t in range(n_frames):
        if rms[t] < 1e-6:
            continue
        row = cmndf[t]
        candidates = np.nonzero(row[tau_min:tau_max] < YIN_THRESHOLD)[0]
        if candidates.size:
            tau = int(candidates[0]) + tau_min
            # walk down to the local minimum of the dip
            while tau + 1 < tau_max and row[tau + 1] < row[tau]:
                tau += 1
        else:
            tau = int(np.argmin(row[tau_min:tau_max])) + tau_min
        tau_refined = _parabolic_min(row, tau)
        strength = max(0.0, 1.0 - row[tau])
        hz = sample_rate / tau_refined
        if F0_MIN <= hz <= F0_MAX:
            f0[t] = hz
            conf[t] = strength ** 2
    return f0, conf


def _parabolic_min(row, tau):
    if tau <= 0 or tau >= len(row) - 1:
        return float(tau)
    a, b, c = row[tau - 1], row[tau], row[tau + 1]
    denom = a - 2.0 * b + c
    if denom <= 0:
        return float(tau)
    shift = 0.5 * (a - c) / denom
    return tau + float(np.clip(shift, -1.0, 1.0))


@lru_cache(maxsize=None)
def _a_weight_power(sample_rate, window):
    """Linear power weights of the A-curve on the rfft bin grid."""
    freqs = np.fft.rfftfreq(window, 1.0 / sample_rate)
    f2 = freqs ** 2
    ra = (12194.0 ** 2 * f2 ** 2) / (
        (f2 + 20.6 ** 2)
        * np.sqrt((f2 + 107.7 ** 2) * (f2 + 737.9 ** 2))
        * (f2 + 12194.0 ** 2)
    )
    a_db = 20.0 * np.log10(np.where(ra > 0, ra, 1e-30)) + 2.0
    return 10.0 ** (a_db / 10.0)


@lru_cache(maxsize=None)
def _loudness_reference(sample_rate, window):
    """A-weighted frame power of a full-scale 1 kHz sine (0 dB anchor)."""
    t = np.arange(sample_rate) / sample_rate
    sine = np.sin(2.0 * np.pi * 1000.0 * t)
    frame = sine[:window]
    return _frame_weighted_power(frame[None, :], sample_rate, window)[0]


def _frame_weighted_power(frames, sample_rate, window):
    win = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(window) / window)
    spec = np.fft.rfft(frames * win, axis=1)
    power = np.abs(spec) ** 2
    return power @ _a_weight_power(sample_rate, window)


def a_weighted_loudness(audio, sample_rate=16000, hop=64):
    """Per-frame A-weighted loudness in dB, clamped to [-80, 0].

    Normalized so a full-scale 1 kHz sine reads about 0 dB.
    """
    audio = np.asarray(audio, dtype=np.float64)
    frames = _centered_frames(audio, hop, LOUDNESS_WINDOW)
    power = _frame_weighted_power(frames, sample_rate, LOUDNESS_WINDOW)
    ref = _loudness_reference(sample_rate, LOUDNESS_WINDOW)
    db = 10.0 * np.log10(np.maximum(power / ref, 1e-20))
    return np.clip(db, LOUDNESS_FLOOR_DB, 0.0)


def extract_features(audio, sample_rate=16000, hop=64):
    f0, conf = estimate_f0(audio, sample_rate, hop)
    loud = a_weighted_loudness(audio, sample_rate, hop)
    return FeatureTrack(f0_hz=f0, confidence=conf, loudness_db=loud,
                        sample_rate=sample_rate, hop=hop)


def hz_to_midi(f0):
    f0 = np.asarray(f0, dtype=np.float64)
    with np.errstate(divide="ignore"):
        midi = 69.0 + 12.0 * np.log2(np.where(f0 > 0, f0, np.nan) / 440.0)
    return np.where(f0 > 0, midi, 0.0)


def normalize(track):
    """FeatureTrack -> ConditioningSeq in [0, 1].

    Pitch channel: midi/127 with f0=0 mapping to 0. Loudness channel:
    (db + 80) / 80.
    """
    pitch = np.clip(hz_to_midi(track.f0_hz) / 127.0, 0.0, 1.0)
    loud = np.clip((track.loudness_db - LOUDNESS_FLOOR_DB) / -LOUDNESS_FLOOR_DB,
                   0.0, 1.0)
    return ConditioningSeq(np.stack([pitch, loud], axis=1))


# ---------------------------------------------------------------------------
# feature cache files (npz container, versioned)

def save_features(path, track):
    np.savez(path,
             f0=track.f0_hz,
             confidence=track.confidence,
             loudness=track.loudness_db,
             sample_rate=np.int64(track.sample_rate),
             hop=np.int64(track.hop),
             version=np.int64(FEATURE_VERSION))


def load_features(path):
    with np.load(path) as data:
        if int(data["version"]) != FEATURE_VERSION:
            raise ValueError(
                f"feature cache version {int(data['version'])} != {FEATURE_VERSION}"
            )
        return FeatureTrack(
            f0_hz=data["f0"],
            confidence=data["confidence"],
            loudness_db=data["loudness"],
            sample_rate=int(data["sample_rate"]),
            hop=int(data["hop"]),
        )
