"""Reliability formulas, synthetic traces and the bandwidth/throughput model.

Throughput is modelled as memory-bound: tokens/s scales with the fraction of
wire bytes that carry user data.  Error-free full protection moves 34 wire
bytes per 32 user bytes, which is pinned to the 18.51 tokens/s baseline.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .bitplane import PlaneLayout, ProtectionConfig
from .controller import AccessEventLog, MemoryController, SequentialReadPolicy
from .crc import CHUNK_BYTES, UNIT_BITS, UNIT_BYTES
from .faults import FaultConfig, substream, unit_error_prob
from .layout import CodewordConfig, MemoryStore

BASELINE_TOKENS_PER_S = 18.51
IDEAL_UTILIZATION = CHUNK_BYTES / UNIT_BYTES  # 32/34
DEFAULT_STORE_CODEWORDS = 1 << 14
DEFAULT_K_DISTRIBUTION = (0.25, 0.25, 0.25, 0.25)  # k = 1..4

_TRACE_STREAM = 0x7ACE
_PAYLOAD_STREAM = 0xDA7A


class UndefinedUtilization(ValueError):
    pass


# -- analytic ----------------------------------------------------------------

def p_escalate(p, k):
    """Probability that a k-chunk random read sees at least one CRC failure."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return unit_error_prob(p, UNIT_BITS * k)


def log_binom_tail(n, p, t):
    """``log P[X > t]`` for ``X ~ Binomial(n, p)``; ``-inf`` when impossible."""
    if t >= n or p <= 0.0:
        return -math.inf
    if p >= 1.0:
        return 0.0
    x = np.arange(t + 1, n + 1, dtype=np.float64)
    terms = (gammaln(n + 1) - gammaln(x + 1) - gammaln(n - x + 1)
             + x * math.log(p) + (n - x) * math.log1p(-p))
    return min(0.0, float(logsumexp(terms)))


def decode_failure_rate(p, config):
    """P[more than t of the 16d+q symbols are hit], symbols hit i.i.d."""
    return math.exp(log_decode_failure_rate(p, config))


def log_decode_failure_rate(p, config):
    ps = unit_error_prob(p, 16)
    return log_binom_tail(config.geom.n, ps, config.t)


def ber_at_failure_rate(config, target=1e-12, lo=-30.0, hi=0.0, iters=200):
    """Raw BER at which the analytic decode failure rate equals ``target``.

    Bisection over ``log10(ber)``; returns the BER.
    """
    log_target = math.log(target)
    if log_decode_failure_rate(10.0 ** lo, config) > log_target:
        raise ValueError("target failure rate already exceeded at the lower bracket")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if log_decode_failure_rate(10.0 ** mid, config) > log_target:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-12:
            break
    return 10.0 ** (0.5 * (lo + hi))


# -- traces ------------------------------------------------------------------

@dataclass(frozen=True)
class TraceParams:
    """Synthetic access mix.

    ``seq_ratio`` is the share of user *data volume* carried by sequential
    whole-codeword requests; the remainder is random requests of ``k``
    chunks with ``k`` drawn from ``random_k_distribution`` over ``1..len``.
    """

    request_count: int
    seq_ratio: float = 0.99
    random_k_distribution: tuple = DEFAULT_K_DISTRIBUTION
    read_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.request_count < 0:
            raise ValueError("request_count must be >= 0")
        for name in ("seq_ratio", "read_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        dist = tuple(float(x) for x in self.random_k_distribution)
        if not dist or any(x < 0 for x in dist) or abs(sum(dist) - 1.0) > 1e-9:
            raise ValueError("random_k_distribution must be non-negative and sum to 1")
        object.__setattr__(self, "random_k_distribution", dist)


@dataclass
class Trace:
    sequential: np.ndarray  # bool
    read: np.ndarray        # bool
    cw: np.ndarray
    offset: np.ndarray
    k: np.ndarray
    data_chunks: int
    n_codewords: int

    def __len__(self):
        return self.cw.size

    def __iter__(self):
        cols = (self.sequential.tolist(), self.read.tolist(), self.cw.tolist(),
                self.offset.tolist(), self.k.tolist())
        return zip(*cols)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["request_id", "class", "kind", "cw", "offset", "k"])
        for i, (seq, rd, cw, off, k) in enumerate(self):
            w.writerow([i, "sequential" if seq else "random", "read" if rd else "write", cw, off, k])
        return buf.getvalue()


def sequential_request_probability(tp, data_chunks):
    """Per-request probability of a sequential request that realises ``seq_ratio`` by volume."""
    ks = np.minimum(np.arange(1, len(tp.random_k_distribution) + 1), data_chunks)
    mean_k = float(np.dot(tp.random_k_distribution, ks))
    s = tp.seq_ratio
    denom = s * mean_k + (1.0 - s) * data_chunks
    return 1.0 if denom == 0 else s * mean_k / denom


def gen_trace(tp, data_chunks, n_codewords=DEFAULT_STORE_CODEWORDS):
    rng = substream(tp.seed, (_TRACE_STREAM,))
    n = tp.request_count
    sequential = rng.random(n) < sequential_request_probability(tp, data_chunks)
    read = rng.random(n) < tp.read_fraction
    k_draw = rng.choice(len(tp.random_k_distribution), size=n, p=tp.random_k_distribution) + 1
    k = np.minimum(k_draw, data_chunks)
    rand_cw = rng.integers(0, n_codewords, size=n)
    rand_off = np.floor(rng.random(n) * (data_chunks - k + 1)).astype(np.int64)
    # sequential requests walk the store in ascending order, wrapping around
    seq_cw = (np.cumsum(sequential) - 1) % n_codewords
    cw = np.where(sequential, seq_cw, rand_cw)
    offset = np.where(sequential, 0, rand_off)
    k = np.where(sequential, data_chunks, k)
    return Trace(sequential, read, cw.astype(np.int64), offset.astype(np.int64),
                 k.astype(np.int64), data_chunks, n_codewords)


# -- trace-driven simulation -----------------------------------------------------

@dataclass
class TrafficStats:
    log: AccessEventLog = field(default_factory=AccessEventLog)
    useful_user_bytes: int = 0
    bypass_bytes_read: int = 0
    bypass_bytes_written: int = 0
    requests: int = 0

    @property
    def wire_bytes_read(self):
        return self.log.wire_bytes_read + self.bypass_bytes_read

    @property
    def wire_bytes_written(self):
        return self.log.wire_bytes_written + self.bypass_bytes_written

    @property
    def wire_bytes(self):
        return self.wire_bytes_read + self.wire_bytes_written


@dataclass(frozen=True)
class PerfResult:
    utilization: float
    normalized_utilization: float
    tokens_per_s: float


def tokens_per_s(stats):
    wire = stats.wire_bytes
    if wire == 0:
        raise UndefinedUtilization("no wire traffic: utilization is undefined")
    u = stats.useful_user_bytes / wire
    norm = u / IDEAL_UTILIZATION
    return PerfResult(u, norm, BASELINE_TOKENS_PER_S * norm)


def protected_config(config, pc):
    """Codeword geometry of the protected stream for one user codeword."""
    layout = PlaneLayout(pc, config.d)
    d = layout.protected_chunks
    if config.preset == "custom":
        return CodewordConfig(d, config.q, config.stripe_width, "custom"), layout
    return CodewordConfig.from_preset(d * CHUNK_BYTES, config.preset, config.stripe_width), layout


def make_store(config, n_codewords=DEFAULT_STORE_CODEWORDS, seed=0):
    """Random store whose codewords are encoded on first touch."""
    return MemoryStore.random(config, n_codewords, seed, lazy=True)


def run_trace(trace, config, fc, policy=SequentialReadPolicy.CRC_FIRST, pc=None, store=None,
              store_seed=0):
    """Replay ``trace`` through a controller and account for the traffic.

    With a :class:`~hbmecc.bitplane.ProtectionConfig` only the protected
    planes go through the controller; bypassed bytes cost one wire byte each
    and never trigger CRC work.
    """
    if trace.data_chunks != config.d:
        raise ValueError("trace was generated for a different codeword size")
    layout = None
    ecc_config = config
    if pc is not None and pc.gamma < 1.0:
        if pc.gamma > 0.0:
            ecc_config, layout = protected_config(config, pc)
        else:
            layout = PlaneLayout(pc, config.d)
    stats = TrafficStats()
    ctl = None
    if pc is None or pc.gamma > 0.0:
        if store is None:
            store = make_store(ecc_config, trace.n_codewords, store_seed)
        elif store.config != ecc_config:
            raise ValueError("store geometry does not match the ECC stream")
        ctl = MemoryController(store, fc, policy, log=stats.log)
    payload_rng = substream(fc.master_seed, (_PAYLOAD_STREAM,))
    d_ecc = ecc_config.d

    for seq, rd, cw, off, k in trace:
        stats.requests += 1
        stats.useful_user_bytes += CHUNK_BYTES * k
        if layout is not None:
            nbytes = layout.bypass_bytes(k)
            if rd:
                stats.bypass_bytes_read += nbytes
            else:
                stats.bypass_bytes_written += nbytes
            if ctl is None:
                continue
        if seq:
            if rd:
                ctl.serve_sequential_read(cw)
            else:
                ctl.serve_sequential_write(
                    cw, payload_rng.integers(0, 256, d_ecc * CHUNK_BYTES, dtype=np.uint8).tobytes())
            continue
        chunks = np.arange(off, off + k) if layout is None else layout.protected_span(off, k)
        if rd:
            ctl.read_chunks(cw, chunks)
        else:
            new = payload_rng.integers(0, 256, (len(chunks), CHUNK_BYTES), dtype=np.uint8)
            ctl.write_chunks(cw, chunks, new)
    return stats


# -- results CSV ----------------------------------------------------------------

RESULTS_HEADER = [
    "preset", "codeword_bytes", "d", "q", "ber", "seq_ratio", "read_fraction", "policy",
    "protection", "seed", "requests", "wire_read", "wire_written", "useful_bytes",
    "escalations", "rs_decodes", "decode_failures", "silent_corruptions", "utilization",
    "norm_utilization", "tokens_per_s",
]


def g6(x):
    return f"{x:.6g}"


def results_row(*, preset, config, ber, seq_ratio, read_fraction, policy, protection, seed, stats):
    perf = tokens_per_s(stats)
    log = stats.log
    return [preset, config.codeword_bytes, config.d, config.q, g6(ber), g6(seq_ratio),
            g6(read_fraction), SequentialReadPolicy(policy).value, protection, seed,
            stats.requests, stats.wire_bytes_read, stats.wire_bytes_written,
            stats.useful_user_bytes, log.escalations, log.rs_decodes, log.rs_decode_failures,
            log.silent_corruptions, g6(perf.utilization), g6(perf.normalized_utilization),
            g6(perf.tokens_per_s)]


PROTECTION_MODES = {
    "full": lambda: ProtectionConfig.full(),
    "exponent": lambda: ProtectionConfig.bf16("exponent"),
    "sign_exponent": lambda: ProtectionConfig.bf16("sign", "exponent"),
    "none": lambda: ProtectionConfig(16, ()),
}
