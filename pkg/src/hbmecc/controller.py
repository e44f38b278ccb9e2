"""Host-side memory controller flows.

Random reads check only the CRCs of the requested chunks and escalate to a
full-codeword fetch plus RS decode when any check fails.  Random writes
patch parity with the differential update when the fetched chunks and the
parity chunks all pass CRC, and fall back to a full read-modify-write
otherwise.  Sequential requests move whole codewords.

Errors are transient: each request copies the codeword image out of the
store and flips bits in that copy under the label ``(cw_id, epoch)``, where
``epoch`` is the controller's request counter.  Only wire bytes are costed.
"""

import csv
import enum
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple, Optional

import numpy as np

from .crc import CHUNK_BYTES, UNIT_BYTES, check_rows, seal_rows
from .faults import FaultConfig, inject
from .layout import (
    build_codeword,
    bytes_to_symbols,
    parity_rows,
    symbol_view,
    symbols_to_bytes,
)
from .rs import DecodeFailure, SparseDataVector, rs_decode, rs_parity_delta


class SequentialReadPolicy(str, enum.Enum):
    CRC_FIRST = "crc_first"
    ALWAYS_DECODE = "always_decode"


@dataclass
class AccessEventLog:
    wire_bytes_read: int = 0
    wire_bytes_written: int = 0
    crc_failures: int = 0  # failing unit checks, not requests
    escalations: int = 0
    rs_decodes: int = 0
    rs_decode_failures: int = 0
    silent_corruptions: int = 0
    delta_updates: int = 0
    full_rmw_fallbacks: int = 0

    def __iadd__(self, other):
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))
        return self

    def as_dict(self):
        return asdict(self)


class EventRecord(NamedTuple):
    request_id: int
    kind: str
    cls: str
    k: int
    crc_failed: bool
    escalated: bool
    decode_ok: Optional[bool]
    wire_read: int
    wire_written: int


EVENT_HEADER = ["request_id", "kind", "class", "k", "crc_failed", "escalated",
                "decode_ok", "wire_read", "wire_written"]


def write_event_csv(records, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(EVENT_HEADER)
    for r in records:
        w.writerow([r.request_id, r.kind, r.cls, r.k, int(r.crc_failed), int(r.escalated),
                    "" if r.decode_ok is None else int(r.decode_ok), r.wire_read, r.wire_written])


class MemoryController:
    """Serve requests against one :class:`~hbmecc.layout.MemoryStore`.

    The controller owns the store for the duration of an experiment;
    requests are handled one at a time in call order.
    """

    def __init__(self, store, fc=None, policy=SequentialReadPolicy.CRC_FIRST,
                 log=None, record_events=False):
        self.store = store
        self.config = store.config
        self.fc = fc or FaultConfig(0.0)
        self.policy = SequentialReadPolicy(policy)
        self.log = log if log is not None else AccessEventLog()
        self.records = [] if record_events else None
        self.epoch = 0

    # -- plumbing --------------------------------------------------------

    def _begin(self, cw_id):
        img = self.store.image(cw_id).copy()
        inject(img, self.fc, (cw_id, self.epoch))
        self.epoch += 1
        return img

    def _record(self, kind, cls, k, crc_failed, escalated, decode_ok, rd, wr):
        log = self.log
        log.wire_bytes_read += rd
        log.wire_bytes_written += wr
        if self.records is not None:
            self.records.append(EventRecord(self.epoch - 1, kind, cls, k, crc_failed,
                                            escalated, decode_ok, rd, wr))

    def _decode(self, img):
        """Decode a full image; returns (data rows, ok flag)."""
        cfg = self.config
        self.log.rs_decodes += 1
        try:
            out = rs_decode(symbol_view(img, cfg), cfg.geom)
        except DecodeFailure:
            self.log.rs_decode_failures += 1
            return img[:cfg.d, :CHUNK_BYTES].copy(), False
        return symbols_to_bytes(out.data).reshape(cfg.d, CHUNK_BYTES), True

    def _deliver(self, cw_id, idx, data, decode_ok):
        if decode_ok is not False and not np.array_equal(data, self.store.truth[cw_id, idx]):
            self.log.silent_corruptions += 1
        return data.tobytes()

    def _data_indices(self, offset, k):
        d = self.config.d
        if k < 1 or offset < 0 or offset + k > d:
            raise ValueError(f"chunk range [{offset}, {offset + k}) outside [0, {d})")
        return np.arange(offset, offset + k)

    @staticmethod
    def _as_indices(chunks, d):
        idx = np.unique(np.asarray(chunks, dtype=np.int64))
        if idx.size == 0 or idx[0] < 0 or idx[-1] >= d:
            raise ValueError(f"chunk indices must be non-empty and inside [0, {d})")
        return idx

    # -- random ------------------------------------------------------------

    def serve_random_read(self, cw_id, offset, k):
        return self.read_chunks(cw_id, self._data_indices(offset, k))

    def read_chunks(self, cw_id, chunks):
        """Random read of an arbitrary set of data chunks in one codeword."""
        cfg = self.config
        idx = self._as_indices(chunks, cfg.d)
        img = self._begin(cw_id)
        fetched = img[idx]
        rd = UNIT_BYTES * idx.size
        ok = check_rows(fetched)
        crc_failed = not ok.all()
        decode_ok = None
        if crc_failed:
            self.log.crc_failures += int((~ok).sum())
            self.log.escalations += 1
            rd += UNIT_BYTES * (cfg.wire_chunks - idx.size)
            full, decode_ok = self._decode(img)
            data = full[idx]
        else:
            data = fetched[:, :CHUNK_BYTES]
        self._record("read", "random", idx.size, crc_failed, crc_failed, decode_ok, rd, 0)
        return self._deliver(cw_id, idx, data, decode_ok)

    def serve_random_write(self, cw_id, offset, new_chunks):
        new = np.frombuffer(bytes(new_chunks), dtype=np.uint8)
        if new.size % CHUNK_BYTES or new.size == 0:
            raise ValueError("new data must be a whole number of 32-byte chunks")
        k = new.size // CHUNK_BYTES
        return self.write_chunks(cw_id, self._data_indices(offset, k), new.reshape(k, CHUNK_BYTES))

    def write_chunks(self, cw_id, chunks, new):
        """Random write of ``new`` rows into the given data chunk indices."""
        cfg = self.config
        idx = self._as_indices(chunks, cfg.d)
        new = np.asarray(new, dtype=np.uint8).reshape(idx.size, CHUNK_BYTES)
        par = np.arange(cfg.d, cfg.wire_chunks)
        img = self._begin(cw_id)
        touched = np.concatenate((idx, par))
        rd = UNIT_BYTES * touched.size
        ok = check_rows(img[touched])
        target = self.store.image(cw_id)
        if ok.all():
            positions = (16 * idx[:, None] + np.arange(16)).reshape(-1)
            old = SparseDataVector(cfg.geom.d_syms, tuple(positions.tolist()),
                                   tuple(bytes_to_symbols(img[idx, :CHUNK_BYTES]).tolist()))
            upd = SparseDataVector(cfg.geom.d_syms, old.positions,
                                   tuple(bytes_to_symbols(new).tolist()))
            p_old = bytes_to_symbols(img[par, :CHUNK_BYTES])[:cfg.q]
            p_new = p_old ^ rs_parity_delta(old, upd, cfg.geom)
            target[idx, :CHUNK_BYTES] = new
            target[par, :CHUNK_BYTES] = parity_rows(p_new, cfg)
            rows = target[touched]  # fancy index copies; written back below
            seal_rows(rows)
            target[touched] = rows
            wr = UNIT_BYTES * touched.size
            self.log.delta_updates += 1
            crc_failed, decode_ok = False, None
        else:
            self.log.crc_failures += int((~ok).sum())
            self.log.escalations += 1
            rd += UNIT_BYTES * (cfg.wire_chunks - touched.size)
            full, decode_ok = self._decode(img)
            full = full.copy()
            full[idx] = new
            target[:] = build_codeword(full, cfg).units
            wr = UNIT_BYTES * cfg.wire_chunks
            self.log.full_rmw_fallbacks += 1
            crc_failed = True
        self.store.truth[cw_id, idx] = new
        self._record("write", "random", idx.size, crc_failed, crc_failed, decode_ok, rd, wr)

    # -- sequential --------------------------------------------------------

    def serve_sequential_read(self, cw_id, policy=None):
        cfg = self.config
        policy = SequentialReadPolicy(policy or self.policy)
        img = self._begin(cw_id)
        everything = np.arange(cfg.d)
        crc_failed = escalated = False
        if policy is SequentialReadPolicy.ALWAYS_DECODE:
            rd = UNIT_BYTES * cfg.wire_chunks
            data, decode_ok = self._decode(img)
        else:
            rd = UNIT_BYTES * cfg.d
            ok = check_rows(img[:cfg.d])
            if ok.all():
                data, decode_ok = img[:cfg.d, :CHUNK_BYTES], None
            else:
                crc_failed = escalated = True
                self.log.crc_failures += int((~ok).sum())
                self.log.escalations += 1
                rd += UNIT_BYTES * cfg.parity_chunks
                data, decode_ok = self._decode(img)
        self._record("read", "sequential", cfg.d, crc_failed, escalated, decode_ok, rd, 0)
        return self._deliver(cw_id, everything, data, decode_ok)

    def serve_sequential_write(self, cw_id, data):
        cfg = self.config
        target = self.store.image(cw_id)
        stored = build_codeword(data, cfg)
        self.epoch += 1
        target[:] = stored.units
        self.store.truth[cw_id] = stored.units[:cfg.d, :CHUNK_BYTES]
        self._record("write", "sequential", cfg.d, False, False, None, 0,
                     UNIT_BYTES * cfg.wire_chunks)
