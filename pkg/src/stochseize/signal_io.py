"""EEG recordings: loading (CSV/EDF), labels, bipolar montage, windowing, synthesis.

Samples are held in volts. Labels come from a JSON sidecar named
``<recording stem>.labels.json`` next to the data file.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, ParseError


class State(str, enum.Enum):
    ICTAL = "ictal"
    INTERICTAL = "interictal"


@dataclass(frozen=True)
class ChannelTrace:
    name: str
    samples: np.ndarray

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float)
        if arr.ndim != 1:
            raise ValueError(f"channel {self.name!r}: samples must be 1-D")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"channel {self.name!r}: non-finite sample values")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class LabeledInterval:
    start_s: float
    end_s: float
    state: State

    def __post_init__(self):
        object.__setattr__(self, "state", State(self.state))
        if not self.start_s < self.end_s:
            raise ValueError(f"interval start {self.start_s} must precede end {self.end_s}")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class SignalRecording:
    """Multichannel EEG with optional ictal/inter-ictal labels."""

    sample_rate_hz: float
    channels: tuple[ChannelTrace, ...]
    labels: tuple[LabeledInterval, ...] = ()
    duration_s: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        chans = tuple(self.channels)
        object.__setattr__(self, "channels", chans)
        lengths = {len(c) for c in chans}
        if len(lengths) > 1:
            raise ParseError(f"inconsistent channel lengths: {sorted(lengths)}")
        n = lengths.pop() if lengths else 0
        if self.duration_s is None:
            object.__setattr__(self, "duration_s", n / self.sample_rate_hz)
        elif abs(self.duration_s * self.sample_rate_hz - n) > 1.0 + 1e-9:
            raise ValueError("duration_s does not match the sample count")
        labels = tuple(sorted(self.labels, key=lambda iv: iv.start_s))
        for iv in labels:
            if iv.start_s < -1e-9 or iv.end_s > self.duration_s + 1e-9:
                raise ValueError(f"label {iv} lies outside [0, {self.duration_s}]")
        for a, b in zip(labels, labels[1:]):
            if b.start_s < a.end_s - 1e-9:
                raise ValueError(f"overlapping labels {a} and {b}")
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return len(self.channels[0]) if self.channels else 0

    @property
    def channel_names(self) -> list[str]:
        return [c.name for c in self.channels]

    def as_array(self) -> np.ndarray:
        """Channels stacked into a ``(n_channels, n_samples)`` array."""
        if not self.channels:
            return np.empty((0, 0))
        return np.stack([c.samples for c in self.channels])

    def channel_index(self, name: str) -> int:
        try:
            return self.channel_names.index(name)
        except ValueError:
            raise KeyError(f"no channel named {name!r}") from None

    def with_labels(self, labels: Iterable[LabeledInterval]) -> "SignalRecording":
        return SignalRecording(self.sample_rate_hz, self.channels, tuple(labels), self.duration_s)

    def scaled(self, a: float) -> "SignalRecording":
        chans = tuple(ChannelTrace(c.name, a * c.samples) for c in self.channels)
        return SignalRecording(self.sample_rate_hz, chans, self.labels, self.duration_s)

    def seconds_in(self, state: State) -> float:
        return sum(iv.duration_s for iv in self.labels if iv.state == State(state))


def meets_inclusion(rec: SignalRecording, min_ictal_s: float = 60.0, min_interictal_s: float = 60.0) -> bool:
    """Patient inclusion filter: enough labelled seizure and non-seizure time."""
    return rec.seconds_in(State.ICTAL) >= min_ictal_s and rec.seconds_in(State.INTERICTAL) >= min_interictal_s


# ---------------------------------------------------------------------------
# labels sidecar


def labels_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".labels.json")


def read_labels(path) -> list[LabeledInterval]:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid label JSON ({exc})") from exc
    if not isinstance(raw, list):
        raise ParseError(f"{path}: label sidecar must be a JSON list")
    out = []
    for item in raw:
        try:
            out.append(LabeledInterval(float(item["start_s"]), float(item["end_s"]), State(item["state"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: bad label entry {item!r} ({exc})") from exc
    return out


def write_labels(labels: Iterable[LabeledInterval], path) -> Path:
    items = [{"start_s": iv.start_s, "end_s": iv.end_s, "state": iv.state.value} for iv in labels]
    Path(path).write_text(json.dumps(items, indent=2) + "\n")
    return Path(path)


# ---------------------------------------------------------------------------
# CSV


def _rate_from_times(times: np.ndarray) -> float:
    if len(times) < 2:
        raise ParseError("need at least two samples to infer the sample rate")
    rate = (len(times) - 1) / (times[-1] - times[0])
    if not np.isfinite(rate) or rate <= 0:
        raise ParseError("time_s column must be strictly increasing")
    return float(f"{rate:.9g}")


def read_csv(path) -> SignalRecording:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if not header or header[0] != "time_s" or len(header) < 2:
            raise ParseError(f"{path}: malformed header, expected 'time_s,<ch1>,...'")
        names = header[1:]
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)  # header-only file
                data = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=float)
        except ValueError:
            data = None  # ragged or non-numeric: rescan row by row for a precise message
        if data is not None:
            if data.size and data.shape[1] != len(header):
                raise ParseError(f"{path}: inconsistent channel lengths")
            cols = data.T if data.size else np.zeros((len(header), 0))
            rate = _rate_from_times(cols[0])
            return SignalRecording(rate, tuple(ChannelTrace(n, c.copy()) for n, c in zip(names, cols[1:])))
        fh.seek(0)
        reader = csv.reader(fh)
        next(reader)
        columns: list[list[float]] = [[] for _ in header]
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            for j, cell in enumerate(row[: len(header)]):
                cell = cell.strip()
                if cell == "":
                    continue
                try:
                    columns[j].append(float(cell))
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: non-numeric value {cell!r}") from None
            if len(row) > len(header):
                raise ParseError(f"{path}:{lineno}: more values than header columns")
    lengths = {len(c) for c in columns}
    if len(lengths) > 1:
        raise ParseError(f"{path}: inconsistent channel lengths")
    times = np.asarray(columns[0])
    rate = _rate_from_times(times)
    chans = tuple(ChannelTrace(n, np.asarray(c)) for n, c in zip(names, columns[1:]))
    return SignalRecording(rate, chans)


def write_csv(rec: SignalRecording, path, write_sidecar: bool = True) -> Path:
    """Write ``time_s,<ch...>`` rows with round-trip exact (17 significant digit) values."""
    path = Path(path)
    data = np.column_stack([np.arange(rec.n_samples) / rec.sample_rate_hz] + [c.samples for c in rec.channels])
    header = ",".join(["time_s"] + rec.channel_names)
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")
    if write_sidecar:
        write_labels(rec.labels, labels_path(path))
    return path


# ---------------------------------------------------------------------------
# EDF (continuous EDF / EDF+C only)

_UNIT_SCALE = {"v": 1.0, "mv": 1e-3, "uv": 1e-6, "µv": 1e-6, "nv": 1e-9}


def _field(buf: bytes, start: int, width: int) -> str:
    return buf[start:start + width].decode("ascii", errors="replace").strip()


def read_edf(path) -> SignalRecording:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 256:
        raise ParseError(f"{path}: malformed header (file shorter than 256 bytes)")
    try:
        header_bytes = int(_field(raw, 184, 8))
        reserved = _field(raw, 192, 44)
        n_records = int(_field(raw, 236, 8))
        record_s = float(_field(raw, 244, 8))
        ns = int(_field(raw, 252, 4))
    except ValueError as exc:
        raise ParseError(f"{path}: malformed header ({exc})") from exc
    if reserved.startswith("EDF+D"):
        raise ParseError(f"{path}: unsupported EDF variant (discontinuous EDF+D records)")
    if header_bytes != 256 * (ns + 1) or len(raw) < header_bytes:
        raise ParseError(f"{path}: malformed header (header size {header_bytes} for {ns} signals)")

    def col(offset: int, width: int) -> list[str]:
        base = 256 + offset * ns
        return [_field(raw, base + i * width, width) for i in range(ns)]

    labels = col(0, 16)
    dims = col(16 + 80, 8)
    try:
        pmin = [float(v) for v in col(16 + 80 + 8, 8)]
        pmax = [float(v) for v in col(16 + 80 + 16, 8)]
        dmin = [int(v) for v in col(16 + 80 + 24, 8)]
        dmax = [int(v) for v in col(16 + 80 + 32, 8)]
        spr = [int(v) for v in col(16 + 80 + 40 + 80, 8)]
    except ValueError as exc:
        raise ParseError(f"{path}: malformed signal header ({exc})") from exc

    keep = [i for i in range(ns) if labels[i] != "EDF Annotations"]
    if not keep:
        raise ParseError(f"{path}: no data signals")
    if len({spr[i] for i in keep}) != 1:
        raise ParseError(f"{path}: unsupported EDF variant (signals have different sample rates)")
    record_len = sum(spr)
    if n_records < 0:
        n_records = (len(raw) - header_bytes) // (2 * record_len)
    expected = header_bytes + 2 * record_len * n_records
    if len(raw) < expected:
        raise ParseError(f"{path}: truncated data section")
    data = np.frombuffer(raw, dtype="<i2", count=record_len * n_records, offset=header_bytes)
    data = data.reshape(n_records, record_len)

    chans = []
    offsets = np.concatenate([[0], np.cumsum(spr)])
    for i in keep:
        digital = data[:, offsets[i]:offsets[i + 1]].reshape(-1).astype(float)
        if dmax[i] == dmin[i] or pmax[i] == pmin[i]:
            raise ParseError(f"{path}: signal {labels[i]!r} has a degenerate range")
        gain = (pmax[i] - pmin[i]) / (dmax[i] - dmin[i])
        phys = pmin[i] + (digital - dmin[i]) * gain
        scale = _UNIT_SCALE.get(dims[i].lower(), 1.0)
        chans.append(ChannelTrace(labels[i], phys * scale))
    rate = spr[keep[0]] / record_s
    return SignalRecording(rate, tuple(chans))


def _edf_num(value: float, width: int = 8) -> str:
    for digits in range(width, 0, -1):
        text = f"{value:.{digits}g}"
        if len(text) <= width:
            return text
    raise ValueError(f"cannot fit {value} into {width} characters")


def write_edf(rec: SignalRecording, path, unit: str = "uV", write_sidecar: bool = True) -> Path:
    """Write a continuous EDF file with 16-bit samples.

    Each channel's physical range is taken from its data, so values are
    quantised to 65535 levels over that range.
    """
    path = Path(path)
    scale = _UNIT_SCALE[unit.lower()]
    fs = rec.sample_rate_hz
    n = rec.n_samples
    if float(fs).is_integer() and n % int(fs) == 0:
        spr, n_records, record_s = int(fs), n // int(fs), 1.0
    else:
        spr, n_records, record_s = n, 1, n / fs
    dmin, dmax = -32768, 32767

    sig_meta = []
    digital = []
    for ch in rec.channels:
        x = ch.samples / scale
        lo, hi = float(np.min(x)), float(np.max(x))
        if hi - lo < 1e-12:
            lo, hi = lo - 1.0, hi + 1.0
        pmin_s, pmax_s = _edf_num(math.floor(lo * 1000) / 1000), _edf_num(math.ceil(hi * 1000) / 1000)
        pmin, pmax = float(pmin_s), float(pmax_s)
        gain = (pmax - pmin) / (dmax - dmin)
        d = np.clip(np.round((x - pmin) / gain + dmin), dmin, dmax).astype("<i2")
        sig_meta.append((ch.name, pmin_s, pmax_s))
        digital.append(d)

    ns = len(rec.channels)

    def pad(text: str, width: int) -> bytes:
        b = text.encode("ascii")[:width]
        return b + b" " * (width - len(b))

    head = b"".join([
        pad("0", 8), pad("X X X X", 80), pad("Startdate X X X X", 80), pad("01.01.00", 8),
        pad("00.00.00", 8), pad(str(256 * (ns + 1)), 8), pad("EDF+C", 44), pad(str(n_records), 8),
        pad(_edf_num(record_s), 8), pad(str(ns), 4),
    ])
    head += b"".join(pad(m[0], 16) for m in sig_meta)
    head += b"".join(pad("", 80) for _ in sig_meta)
    head += b"".join(pad(unit, 8) for _ in sig_meta)
    head += b"".join(pad(m[1], 8) for m in sig_meta)
    head += b"".join(pad(m[2], 8) for m in sig_meta)
    head += b"".join(pad(str(dmin), 8) for _ in sig_meta)
    head += b"".join(pad(str(dmax), 8) for _ in sig_meta)
    head += b"".join(pad("", 80) for _ in sig_meta)
    head += b"".join(pad(str(spr), 8) for _ in sig_meta)
    head += b"".join(pad("", 32) for _ in sig_meta)

    body = np.stack([d.reshape(n_records, spr) for d in digital], axis=1) if ns else np.empty(0, "<i2")
    path.write_bytes(head + body.astype("<i2").tobytes())
    if write_sidecar:
        write_labels(rec.labels, labels_path(path))
    return path


def load_recording(source, format: str | None = None) -> SignalRecording:
    """Load a CSV or EDF recording, attaching labels from the sidecar if present."""
    source = Path(source)
    if not source.exists():
        raise FileNotFoundError(source)
    fmt = (format or source.suffix.lstrip(".")).upper()
    if fmt == "CSV":
        rec = read_csv(source)
    elif fmt == "EDF":
        rec = read_edf(source)
    else:
        raise ParseError(f"unsupported format {fmt!r}")
    sidecar = labels_path(source)
    if sidecar.exists():
        rec = rec.with_labels(read_labels(sidecar))
    return rec


# ---------------------------------------------------------------------------
# montage

# ACNS temporal-central-parasagittal bipolar chain, 22 pairs.
TCP_PAIRS: tuple[tuple[str, str], ...] = (
    ("FP1", "F7"), ("F7", "T3"), ("T3", "T5"), ("T5", "O1"),
    ("FP2", "F8"), ("F8", "T4"), ("T4", "T6"), ("T6", "O2"),
    ("A1", "T3"), ("T3", "C3"), ("C3", "CZ"), ("CZ", "C4"), ("C4", "T4"), ("T4", "A2"),
    ("FP1", "F3"), ("F3", "C3"), ("C3", "P3"), ("P3", "O1"),
    ("FP2", "F4"), ("F4", "C4"), ("C4", "P4"), ("P4", "O2"),
)

TEN_TWENTY_ELECTRODES: tuple[str, ...] = tuple(dict.fromkeys(e for pair in TCP_PAIRS for e in pair))


@dataclass(frozen=True)
class MontageSpec:
    pairs: tuple[tuple[str, str], ...] = TCP_PAIRS

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((str(a), str(c)) for a, c in self.pairs))
        if not self.pairs:
            raise ConfigError("montage needs at least one pair")


def apply_montage(rec: SignalRecording, spec: MontageSpec = MontageSpec()) -> SignalRecording:
    """Bipolar re-reference: output channel i is ``anode_i - cathode_i``."""
    names = {c.name.upper(): c for c in rec.channels}
    for pair in spec.pairs:
        for electrode in pair:
            if electrode.upper() not in names:
                raise KeyError(f"electrode {electrode!r} missing from recording")
    chans = tuple(
        ChannelTrace(f"{a}-{c}", names[a.upper()].samples - names[c.upper()].samples) for a, c in spec.pairs
    )
    return SignalRecording(rec.sample_rate_hz, chans, rec.labels, rec.duration_s)


# ---------------------------------------------------------------------------
# windows


@dataclass(frozen=True)
class Window:
    channel_index: int
    start_s: float
    length_s: float
    state: State

    @property
    def end_s(self) -> float:
        return self.start_s + self.length_s

    def sample_slice(self, sample_rate_hz: float) -> slice:
        start = int(round(self.start_s * sample_rate_hz))
        return slice(start, start + int(round(self.length_s * sample_rate_hz)))


def extract_windows(rec: SignalRecording, length_s: float = 5.0, channel_index: int = 0) -> list[Window]:
    """Tile each labelled interval with back-to-back windows; partial tails are dropped.

    The tiling depends only on the labels, so it is the same for every channel;
    ``channel_index`` just records which channel the windows are attached to.
    """
    if not length_s > 0:
        raise ValueError("window length must be positive")
    out = []
    for iv in rec.labels:
        count = int(math.floor(iv.duration_s / length_s + 1e-9))
        out.extend(Window(channel_index, iv.start_s + i * length_s, length_s, iv.state) for i in range(count))
    return out


def window_samples(rec: SignalRecording, window: Window, channel_index: int | None = None) -> np.ndarray:
    ch = window.channel_index if channel_index is None else channel_index
    return rec.channels[ch].samples[window.sample_slice(rec.sample_rate_hz)]


# ---------------------------------------------------------------------------
# synthesis


@dataclass
class SynthesisConfig:
    """Parameters for a synthetic labelled recording.

    ``schedule`` is a sequence of ``(state, duration_s)`` segments laid back to
    back from t=0. Seizure channels carry a sinusoid of ``ictal_amplitude``
    times the noise standard deviation during ictal segments.
    """

    n_channels: int = 4
    sample_rate_hz: float = 1000.0
    schedule: Sequence[tuple[str, float]] = (("interictal", 60.0), ("ictal", 60.0))
    duration_s: float | None = None
    seizure_channels: Sequence[int] = (0,)
    ictal_amplitude: float | Sequence[float] = 5.0
    rhythm_hz: float = 3.0
    noise_std: float = 50e-6
    noise_corner_hz: float = 1.0
    channel_names: Sequence[str] | None = None

    def validate(self):
        if not self.n_channels > 0 or int(self.n_channels) != self.n_channels:
            raise ConfigError("n_channels must be a positive integer")
        if not self.sample_rate_hz > 0:
            raise ConfigError("sample_rate_hz must be positive")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")
        for state, dur in self.schedule:
            State(state)
            if not dur > 0:
                raise ConfigError("schedule durations must be positive")
        for ch in self.seizure_channels:
            if not 0 <= ch < self.n_channels:
                raise ConfigError(f"seizure channel {ch} out of range")
        if not np.isscalar(self.ictal_amplitude) and len(self.ictal_amplitude) != len(self.seizure_channels):
            raise ConfigError("need one ictal_amplitude per seizure channel")
        if self.channel_names is not None and len(self.channel_names) != self.n_channels:
            raise ConfigError("channel_names length must equal n_channels")
        total = sum(d for _, d in self.schedule)
        if self.duration_s is not None and self.duration_s < total - 1e-9:
            raise ConfigError("duration_s shorter than the schedule")
        if self.duration_s is None and total == 0:
            raise ConfigError("empty schedule requires duration_s")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthesisConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synthesis keys: {sorted(unknown)}")
        d = dict(d)
        if "schedule" in d:
            d["schedule"] = [tuple(seg) for seg in d["schedule"]]
        return cls(**d)


def pink_noise(n: int, sample_rate_hz: float, rng: np.random.Generator, corner_hz: float = 1.0) -> np.ndarray:
    """Unit-variance noise with a 1/f power spectrum above ``corner_hz`` (flat below)."""
    if n == 0:
        return np.zeros(0)
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    f = np.fft.rfftfreq(n, d=1.0 / sample_rate_hz)
    spec *= 1.0 / np.sqrt(np.maximum(f, corner_hz))
    spec[0] = 0.0
    x = np.fft.irfft(spec, n)
    sd = x.std()
    return x / sd if sd > 0 else x


def synthesize_recording(config: SynthesisConfig, seed: int = 0) -> SignalRecording:
    config.validate()
    rng = np.random.default_rng(seed)
    fs = float(config.sample_rate_hz)
    total = sum(d for _, d in config.schedule)
    duration = config.duration_s if config.duration_s is not None else total
    n = int(round(duration * fs))
    duration = n / fs

    labels = []
    t0 = 0.0
    for state, dur in config.schedule:
        labels.append(LabeledInterval(t0, min(t0 + dur, duration), State(state)))
        t0 += dur

    amps = np.broadcast_to(np.asarray(config.ictal_amplitude, dtype=float), (len(config.seizure_channels),))
    planted = dict(zip(config.seizure_channels, amps))
    t = np.arange(n) / fs
    names = list(config.channel_names) if config.channel_names else [f"ch{i}" for i in range(config.n_channels)]
    chans = []
    for ch in range(config.n_channels):
        x = config.noise_std * pink_noise(n, fs, rng, config.noise_corner_hz)
        if ch in planted:
            amp = planted[ch] * config.noise_std
            for iv in labels:
                if iv.state is State.ICTAL:
                    sl = slice(int(round(iv.start_s * fs)), int(round(iv.end_s * fs)))
                    phase = rng.uniform(0, 2 * np.pi)
                    x[sl] += amp * np.sin(2 * np.pi * config.rhythm_hz * t[sl] + phase)
        chans.append(ChannelTrace(names[ch], x))
    return SignalRecording(fs, tuple(chans), tuple(labels), duration)
