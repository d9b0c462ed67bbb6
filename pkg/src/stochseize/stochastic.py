"""Bit-level simulation of the stochastic inference back end.

Tunable Bernoulli generators feed a multi-input Muller C-element; its output
bitstream is low-pass decoded and thresholded. In the stochastic regime the
C-element's 1-density settles at ``prod(D) / (prod(D) + prod(1 - D))``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from .bayes import _p, classify
from .signal_io import State

DEFAULT_STREAM_BITS = 5000  # 1000 bit/s over a 5 s decision window


@dataclass(frozen=True)
class StochasticStream:
    bits: np.ndarray
    encoded_p: float | None = None

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=np.uint8)
        if b.ndim != 1:
            raise ValueError("bitstream must be 1-D")
        object.__setattr__(self, "bits", b)

    def __len__(self):
        return len(self.bits)

    @property
    def mean(self) -> float:
        return float(self.bits.mean())


def generate_stream(p: float, n_bits: int, seed) -> StochasticStream:
    """``n_bits`` i.i.d. Bernoulli(p) bits from a seeded PCG64 source."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if n_bits < 1:
        raise ValueError("n_bits must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    bits = (rng.random(n_bits, dtype=np.float32) < p).view(np.uint8)
    return StochasticStream(bits, p)


@dataclass
class CElementState:
    input_count: int
    q: int = 0  # powers up in the non-seizure state

    def __post_init__(self):
        if self.input_count < 2:
            raise ValueError("a C-element needs at least two inputs")


def c_element_step(state: CElementState, inputs: Sequence[int]) -> int:
    """One clock of the C-element truth table: set on all-1, reset on all-0, else hold."""
    if len(inputs) != state.input_count:
        raise ValueError(f"expected {state.input_count} inputs, got {len(inputs)}")
    if all(inputs):
        state.q = 1
    elif not any(inputs):
        state.q = 0
    return state.q


@numba.njit(cache=True)
def _hold(events, q0):
    # events: 1 = all inputs high (set), 2 = all low (reset), 0 = hold
    out = np.empty(events.size, np.uint8)
    q = q0
    for i in range(events.size):
        e = events[i]
        if e == 1:
            q = 1
        elif e == 2:
            q = 0
        out[i] = q
    return out


def _scan(bits, q0):
    all_high = np.logical_and.reduce(bits, axis=0).view(np.uint8)
    all_low = np.logical_not(np.logical_or.reduce(bits, axis=0)).view(np.uint8)
    return _hold(all_high | (all_low << 1), np.uint8(q0))


def run_c_network(streams: Sequence[StochasticStream], q0: int = 0) -> StochasticStream:
    """Clock a single flat multi-input C-element over equal-length streams."""
    if len(streams) < 2:
        raise ValueError("a C-element network needs at least two input streams")
    n = len(streams[0])
    if any(len(s) != n for s in streams):
        raise ValueError("input streams differ in length")
    bits = np.stack([s.bits for s in streams])
    return StochasticStream(_scan(bits, np.uint8(q0)))


def run_c_tree(streams: Sequence[StochasticStream], q0: int = 0) -> StochasticStream:
    """Alternate builder: a balanced tree of two-input C-elements.

    The hysteresis of inner nodes makes their outputs autocorrelated, so the
    tree only approximates the flat element's fusion law; it exists for
    cross-checking against :func:`run_c_network`.
    """
    layer = list(streams)
    if len(layer) < 2:
        raise ValueError("a C-element network needs at least two input streams")
    while len(layer) > 1:
        nxt = [run_c_network(layer[i:i + 2], q0) for i in range(0, len(layer) - 1, 2)]
        if len(layer) % 2:
            nxt.append(layer[-1])
        layer = nxt
    return layer[0]


def fusion_law(ds: Sequence[float]) -> float:
    """Stationary C-element output density for independent input densities."""
    ds = np.asarray(ds, dtype=float)
    a, b = np.prod(ds), np.prod(1.0 - ds)
    return float(a / (a + b))


class DecoderMode(str, enum.Enum):
    MOVING_AVERAGE = "moving_average"
    FIRST_ORDER_LPF = "first_order_lpf"


@dataclass(frozen=True)
class DecoderConfig:
    """Low-pass decode of the output bitstream.

    ``window_bits=None`` averages the whole stream. The first-order filter
    starts discharged (0) and reports its final value.
    """

    mode: DecoderMode = DecoderMode.MOVING_AVERAGE
    window_bits: int | None = None
    alpha: float = 0.999
    threshold: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "mode", DecoderMode(self.mode))
        if self.window_bits is not None and self.window_bits < 1:
            raise ValueError("window_bits must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")


def decode(stream: StochasticStream, cfg: DecoderConfig = DecoderConfig()) -> tuple[float, State]:
    bits = stream.bits
    if bits.size == 0:
        raise ValueError("cannot decode an empty stream")
    if cfg.mode is DecoderMode.MOVING_AVERAGE:
        w = bits.size if cfg.window_bits is None else cfg.window_bits
        if bits.size < w:
            raise ValueError(f"insufficient bits: {bits.size} < window {w}")
        est = float(bits[-w:].mean())
    else:
        # y[n] = a*y[n-1] + (1-a)*b[n] from y=0: closed-form final value
        a = cfg.alpha
        weights = (1.0 - a) * a ** np.arange(bits.size - 1, -1, -1, dtype=float)
        est = float(np.dot(weights, bits))
    return est, classify(est, cfg.threshold)


def _seed_streams(seed, count: int) -> list[np.random.Generator]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(count)]


def stochastic_posterior(prior, evidences: Sequence, n_bits: int = DEFAULT_STREAM_BITS, seed=0,
                         decoder: DecoderConfig = DecoderConfig()) -> float:
    """Estimate the fused posterior by simulating RNGs -> C-element -> low-pass.

    The prior is one more input stream alongside one stream per evidence.
    """
    probs = [_p(prior)] + [_p(e) for e in evidences]
    if len(probs) == 1:
        probs.append(0.5)  # a lone prior passes through a C-element paired with a 0.5 stream
    rngs = _seed_streams(seed, len(probs))
    streams = [generate_stream(p, n_bits, r) for p, r in zip(probs, rngs)]
    est, _ = decode(run_c_network(streams), decoder)
    return est


# ---------------------------------------------------------------------------
# packed dump: one JSON header line, then bits packed MSB-first


def write_stream(stream: StochasticStream, path, seed=None) -> Path:
    header = {"n_bits": len(stream), "encoded_p": stream.encoded_p, "seed": seed}
    path = Path(path)
    path.write_bytes(json.dumps(header).encode() + b"\n" + np.packbits(stream.bits, bitorder="big").tobytes())
    return path


def read_stream(path) -> tuple[StochasticStream, dict]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl])
    packed = np.frombuffer(raw[nl + 1:], dtype=np.uint8)
    bits = np.unpackbits(packed, bitorder="big")[: header["n_bits"]]
    return StochasticStream(bits, header.get("encoded_p")), header
