"""Bandwidth-aware RS+CRC protection for HBM-style memories, in simulation."""

from .bitplane import ProtectionConfig, field_flip_stats
from .controller import AccessEventLog, MemoryController, SequentialReadPolicy
from .crc import ChunkUnit, crc16
from .faults import FaultConfig, inject, unit_error_prob
from .gf import gf_div, gf_inv, gf_mul
from .layout import CodewordConfig, MemoryStore, StoredCodeword, build_codeword
from .perf import (
    TraceParams,
    TrafficStats,
    decode_failure_rate,
    gen_trace,
    p_escalate,
    run_trace,
    tokens_per_s,
)
from .rs import (
    DecodeFailure,
    RsGeometry,
    SparseDataVector,
    rs_decode,
    rs_encode,
    rs_parity_delta,
)

__version__ = "0.1.0"
