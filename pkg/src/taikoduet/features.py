"""Per-frame audio features and their on-disk format.

Each 23ms frame of mono audio becomes 40 log-compressed band energies:
the frame is Hann-windowed, zero-padded by half to the next power of
two, and the magnitude spectrum is summed into 40 geometrically spaced
bands between 20 Hz and Nyquist. The matrices are meant to be computed
offline and loaded by the interactive server.

Feature file layout (little-endian):

    magic    4 bytes  b"TDFX"
    version  uint32   1
    rows     uint32
    cols     uint32   always 40
    rate     uint32   source sample rate in Hz
    payload  rows * cols float32, row-major
"""

from __future__ import annotations

import math
import struct
import wave
from dataclasses import dataclass

import numpy as np

from .chart import FRAME_MS

BAND_COUNT = 40
MIN_BAND_HZ = 20.0
MIN_SAMPLE_RATE = 8000

_MAGIC = b"TDFX"
_VERSION = 1
_HEADER = struct.Struct("<4sIIII")


class FeatureError(ValueError):
    """Bad audio input for feature extraction."""


class FeatureFormatError(ValueError):
    """Corrupt or mismatched feature file."""


@dataclass(frozen=True)
class FeatureMatrix:
    """One row of 40 band energies per 23ms frame, float32, all >= 0."""

    data: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[1] != BAND_COUNT:
            raise FeatureError(f"feature matrix must be (frames, {BAND_COUNT})")
        if self.data.dtype != np.float32:
            object.__setattr__(self, "data", self.data.astype(np.float32))
        self.data.setflags(write=False)

    @property
    def frame_count(self) -> int:
        return int(self.data.shape[0])


def _frame_count_for_samples(n_samples: int, sample_rate_hz: int) -> int:
    # ceil(duration_ms / 23) in exact integer arithmetic
    return -(-(n_samples * 1000) // (sample_rate_hz * FRAME_MS))


def band_edges(sample_rate_hz: int) -> np.ndarray:
    """The 41 geometric band edges from 20 Hz to Nyquist."""
    return np.geomspace(MIN_BAND_HZ, sample_rate_hz / 2, BAND_COUNT + 1)


def extract_features(samples: np.ndarray, sample_rate_hz: int) -> FeatureMatrix:
    """Compute the per-frame band-energy matrix for mono audio."""
    if sample_rate_hz < MIN_SAMPLE_RATE:
        raise FeatureError(f"sample rate {sample_rate_hz} below minimum {MIN_SAMPLE_RATE}")
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise FeatureError("audio must be a mono 1-D array")
    frame_len = round(sample_rate_hz * FRAME_MS / 1000)
    if samples.size < frame_len:
        raise FeatureError(f"need at least one {FRAME_MS}ms frame of audio")
    if not np.all(np.isfinite(samples)):
        raise FeatureError("audio contains non-finite samples")

    n_frames = _frame_count_for_samples(samples.size, sample_rate_hz)
    n_fft = 1 << math.ceil(math.log2(frame_len * 1.5))
    window = np.hanning(frame_len)

    # map every rfft bin to its band; bins below 20 Hz are discarded
    freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate_hz)
    edges = band_edges(sample_rate_hz)
    bins = np.searchsorted(edges, freqs, side="right") - 1
    bins[freqs >= edges[-1]] = BAND_COUNT - 1  # Nyquist bin into the top band
    valid = bins >= 0

    step = sample_rate_hz * FRAME_MS / 1000  # exact frame stride in samples
    out = np.zeros((n_frames, BAND_COUNT), dtype=np.float64)
    for block in range(0, n_frames, 512):
        idx = np.arange(block, min(block + 512, n_frames))
        starts = np.floor(idx * step + 0.5).astype(np.int64)
        segs = np.zeros((idx.size, frame_len))
        for row, start in enumerate(starts):
            chunk = samples[start : start + frame_len]
            segs[row, : chunk.size] = chunk
        mags = np.abs(np.fft.rfft(segs * window, n=n_fft, axis=1))
        for b in range(BAND_COUNT):
            sel = valid & (bins == b)
            if sel.any():
                out[idx, b] = mags[:, sel].sum(axis=1)
    return FeatureMatrix(data=np.log1p(out).astype(np.float32), sample_rate_hz=sample_rate_hz)


def save_features(matrix: FeatureMatrix, path) -> None:
    header = _HEADER.pack(
        _MAGIC, _VERSION, matrix.data.shape[0], matrix.data.shape[1], matrix.sample_rate_hz
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(matrix.data, dtype="<f4").tobytes())


def load_features(path) -> FeatureMatrix:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise FeatureFormatError("truncated header")
    magic, version, rows, cols, rate = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise FeatureFormatError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise FeatureFormatError(f"unsupported version {version}")
    if cols != BAND_COUNT:
        raise FeatureFormatError(f"expected {BAND_COUNT} columns, header says {cols}")
    payload = blob[_HEADER.size :]
    expected = rows * cols * 4
    if len(payload) != expected:
        raise FeatureFormatError(
            f"payload is {len(payload)} bytes but header declares {rows} rows ({expected} bytes)"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, cols).copy()
    return FeatureMatrix(data=data, sample_rate_hz=rate)


def read_wav_mono(path) -> tuple[np.ndarray, int]:
    """Read a 16-bit PCM WAV file as mono float samples in [-1, 1]."""
    with wave.open(str(path), "rb") as wav:
        if wav.getsampwidth() != 2:
            raise FeatureError("only 16-bit PCM WAV is supported")
        rate = wav.getframerate()
        raw = wav.readframes(wav.getnframes())
        data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
        channels = wav.getnchannels()
    if channels > 1:
        data = data.reshape(-1, channels).mean(axis=1)
    return data, rate


def write_wav_mono(path, samples: np.ndarray, sample_rate_hz: int) -> None:
    """Write float samples in [-1, 1] as a 16-bit PCM WAV file."""
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.round(clipped * 32767).astype("<i2")
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(sample_rate_hz)
        wav.writeframes(pcm.tobytes())
