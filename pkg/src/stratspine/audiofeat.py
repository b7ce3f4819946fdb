"""Audio to point cloud: STFT windows, 29 per-window features, 59-dim blocks.

Per window: spectral centroid, 85% rolloff, flux, zero-crossing rate and RMS,
then MFCC 1-12 and a 12-bin chroma. A block of consecutive windows is
summarised by the mean and population std of each window feature plus the
fraction of low-energy windows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dct
from scipy.io import wavfile

from .geometry import InputError, PointCloud

N_WINDOW_FEATURES = 29
N_BLOCK_FEATURES = 2 * N_WINDOW_FEATURES + 1
N_MEL_BANDS = 26
N_MFCC = 12
ROLLOFF = 0.85
LOG_FLOOR = 1e-10
PITCH_CLASSES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")


@dataclass
class WavAudio:
    samples: np.ndarray
    rate: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim == 2:
            s = s.mean(axis=1)
        if s.ndim != 1:
            raise InputError(f"audio must be mono or (n, channels), got shape {s.shape}")
        if not self.rate > 0:
            raise InputError("sample rate must be positive")
        if not np.all(np.isfinite(s)):
            raise InputError("audio contains non-finite samples")
        self.samples = s
        self.rate = int(self.rate)

    @property
    def duration(self) -> float:
        return self.samples.size / self.rate


@dataclass
class FeatureBlock:
    values: np.ndarray
    start_window: int


@dataclass
class AudioParams:
    window: int = 2048
    block_len: int = 150
    block_hop: int = 1


def read_wav(path) -> WavAudio:
    """Read 16-bit PCM or 32-bit float WAV; stereo is averaged to mono."""
    try:
        rate, data = wavfile.read(str(path))
    except (ValueError, OSError) as exc:
        raise InputError(f"cannot read WAV {path}: {exc}") from None
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise InputError(f"unsupported WAV sample type {data.dtype}; use 16-bit PCM or 32-bit float")
    return WavAudio(samples, rate)


def write_wav(path, audio: WavAudio) -> None:
    """Write ``audio`` as 16-bit PCM, the inverse of :func:`read_wav` up to rounding
    (values outside the int16 range are clipped)."""
    pcm = np.clip(np.round(audio.samples * 32768.0), -32768, 32767).astype(np.int16)
    wavfile.write(str(path), audio.rate, pcm)


def _check_window(window: int):
    if window < 2 or window & (window - 1):
        raise InputError(f"window must be a power of two, got {window}")


def time_windows(audio: WavAudio, window: int = 2048) -> np.ndarray:
    """Non-overlapping sample windows; the trailing partial window is dropped."""
    _check_window(window)
    n = audio.samples.size // window
    if n < 1:
        raise InputError(f"audio has {audio.samples.size} samples, fewer than one window of {window}")
    return audio.samples[: n * window].reshape(n, window)


def stft_frames(audio: WavAudio, window: int = 2048) -> np.ndarray:
    """Hann-windowed magnitude spectra of the non-overlapping windows, ``(n, window/2+1)``."""
    frames = time_windows(audio, window)
    return np.abs(np.fft.rfft(frames * np.hanning(window), axis=1))


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(rate: int, window: int, n_bands: int = N_MEL_BANDS) -> np.ndarray:
    """Triangular filters evenly spaced in mel from 0 to ``rate/2``, ``(n_bands, window/2+1)``."""
    freqs = np.fft.rfftfreq(window, 1.0 / rate)
    edges = _mel_to_hz(np.linspace(0.0, _hz_to_mel(rate / 2.0), n_bands + 2))
    bank = np.zeros((n_bands, freqs.size))
    for b in range(n_bands):
        lo, mid, hi = edges[b], edges[b + 1], edges[b + 2]
        rise = (freqs - lo) / (mid - lo)
        fall = (hi - freqs) / (hi - mid)
        bank[b] = np.clip(np.minimum(rise, fall), 0.0, None)
    return bank


def chroma_map(rate: int, window: int) -> np.ndarray:
    """Pitch class (C = 0 ... B = 11) of every spectrum bin against A440; -1 for DC."""
    freqs = np.fft.rfftfreq(window, 1.0 / rate)
    out = np.full(freqs.size, -1, dtype=np.intp)
    f = freqs[1:]
    out[1:] = np.mod(np.round(69.0 + 12.0 * np.log2(f / 440.0)).astype(np.intp), 12)
    return out


class _Extractor:
    """Caches the filterbank and chroma folding for one (rate, window)."""

    def __init__(self, rate: int, window: int):
        self.rate = rate
        self.window = window
        self.freqs = np.fft.rfftfreq(window, 1.0 / rate)
        self.mel = mel_filterbank(rate, window)
        self.pitch = chroma_map(rate, window)

    def __call__(self, frame, prev_frame, time_window) -> np.ndarray:
        mag = np.asarray(frame, dtype=np.float64)
        total = mag.sum()
        if total > 0:
            centroid = float(self.freqs @ mag / total)
            k = int(np.searchsorted(np.cumsum(mag), ROLLOFF * total))
            rolloff = float(self.freqs[min(k, mag.size - 1)])
        else:
            centroid = rolloff = 0.0
        flux = 0.0 if prev_frame is None else float(np.linalg.norm(mag - prev_frame))
        x = np.asarray(time_window, dtype=np.float64)
        zcr = float(np.count_nonzero(x[1:] * x[:-1] < 0) / max(x.size - 1, 1))
        rms = float(np.sqrt(np.mean(x ** 2)))

        energies = self.mel @ (mag ** 2)
        cep = dct(np.log(np.maximum(energies, LOG_FLOOR)), type=2, norm="ortho")
        mfcc = cep[1:N_MFCC + 1]

        chroma = np.zeros(12)
        keep = self.pitch >= 0
        np.add.at(chroma, self.pitch[keep], mag[keep])
        if chroma.max() > 0:
            chroma /= chroma.max()
        return np.concatenate([[centroid, rolloff, flux, zcr, rms], mfcc, chroma])


def window_features(frame, prev_frame, time_window, rate: int = 44100) -> np.ndarray:
    """The 29 features of one window; ``prev_frame`` is ``None`` for the first."""
    return _Extractor(rate, 2 * (len(frame) - 1))(frame, prev_frame, time_window)


def all_window_features(audio: WavAudio, window: int = 2048) -> np.ndarray:
    frames = stft_frames(audio, window)
    raw = time_windows(audio, window)
    ext = _Extractor(audio.rate, window)
    out = np.empty((frames.shape[0], N_WINDOW_FEATURES))
    for i in range(frames.shape[0]):
        out[i] = ext(frames[i], frames[i - 1] if i else None, raw[i])
    return out


def block_count(n_windows: int, block_len: int = 150, block_hop: int = 1) -> int:
    if block_len < 1 or block_hop < 1:
        raise InputError("block_len and block_hop must be positive")
    if n_windows < block_len:
        raise InputError(f"{n_windows} windows is fewer than one block of {block_len}")
    return (n_windows - block_len) // block_hop + 1


def block_features(windows, rms, block_len: int = 150, block_hop: int = 1) -> list:
    """Mean and std of each window feature over every block, then the
    fraction of windows whose RMS is below the block mean RMS."""
    w = np.asarray(windows, dtype=np.float64)
    rms = np.asarray(rms, dtype=np.float64)
    if w.ndim != 2 or rms.shape != (w.shape[0],):
        raise InputError("windows must be (n, k) with one RMS value per window")
    count = block_count(w.shape[0], block_len, block_hop)
    blocks = []
    for b in range(count):
        s = b * block_hop
        chunk = w[s:s + block_len]
        r = rms[s:s + block_len]
        low = np.count_nonzero(r < r.mean()) / block_len
        blocks.append(FeatureBlock(np.concatenate([chunk.mean(axis=0), chunk.std(axis=0), [low]]), s))
    return blocks


def normalize_columns(x: np.ndarray) -> np.ndarray:
    """Divide each column by its population std; constant columns are left as is."""
    sd = x.std(axis=0)
    return x / np.where(sd > 0, sd, 1.0)


def song_to_cloud(audio: WavAudio, params: AudioParams | None = None):
    """59-dimensional block cloud in time order, plus ``(start_s, duration_s)`` per row."""
    p = params or AudioParams()
    feats = all_window_features(audio, p.window)
    blocks = block_features(feats, feats[:, 4], p.block_len, p.block_hop)
    x = normalize_columns(np.stack([b.values for b in blocks]))
    span = p.block_len * p.window / audio.rate
    times = [(b.start_window * p.window / audio.rate, span) for b in blocks]
    return PointCloud(x), times


def format_times_json(times) -> str:
    rows = [{"row": i, "start": float(s), "duration": float(d)} for i, (s, d) in enumerate(times)]
    return json.dumps(rows, indent=1)


def wav_to_cloud(path, params: AudioParams | None = None):
    return song_to_cloud(read_wav(Path(path)), params)
