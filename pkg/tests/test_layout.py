import io
import struct

import numpy as np
import pytest

from hbmecc.layout import (
    CodewordConfig,
    MemoryStore,
    build_codeword,
    build_codewords,
    bytes_to_symbols,
    dump_codeword,
    dump_header,
    load_dump,
    map_chunk_to_channel,
    symbol_view,
)
from hbmecc.rs import rs_decode, syndromes
from oracles import crc16_bitwise, ref_encode

GRID = [(size, preset) for size in (64, 256, 512, 1024, 2048)
        for preset in ("rate-16/17", "fixed-parity")]


def test_derived_geometry():
    cfg = CodewordConfig(16, 16)
    assert (cfg.parity_chunks, cfg.wire_chunks, cfg.wire_bytes) == (1, 17, 578)
    assert cfg.rate == pytest.approx(16 / 17)
    assert cfg.t == 8
    assert CodewordConfig(4, 17).parity_chunks == 2
    big = CodewordConfig.from_preset(2048, "rate-16/17")
    assert (big.d, big.q, big.parity_chunks, big.wire_chunks) == (64, 64, 4, 68)
    fixed = CodewordConfig.from_preset(2048, "fixed-parity")
    assert (fixed.q, fixed.wire_chunks) == (16, 65)


@pytest.mark.parametrize("kwargs", [dict(data_chunks=0, parity_syms=1),
                                    dict(data_chunks=1, parity_syms=0),
                                    dict(data_chunks=1, parity_syms=1, stripe_width=17),
                                    dict(data_chunks=1, parity_syms=1, stripe_width=0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        CodewordConfig(**kwargs)


def test_preset_validation():
    with pytest.raises(ValueError):
        CodewordConfig.from_preset(100, "fixed-parity")
    with pytest.raises(ValueError):
        CodewordConfig.from_preset(64, "rate-1/2")


def test_symbols_are_big_endian_pairs():
    assert bytes_to_symbols(b"\x12\x34\xab\xcd").tolist() == [0x1234, 0xABCD]


def test_zero_data_codeword():
    cfg = CodewordConfig(4, 20)
    stored = build_codeword(bytes(4 * 32), cfg)
    assert not stored.units[:, :32].any()
    assert all(int.from_bytes(u[32:].tobytes(), "big") == 0xF14C for u in stored.units)
    assert stored.clean()


@pytest.mark.parametrize("size,preset", GRID)
def test_round_trip_over_presets(size, preset):
    cfg = CodewordConfig.from_preset(size, preset)
    rng = np.random.default_rng(size)
    data = rng.integers(0, 256, (cfg.d, 32), dtype=np.uint8)
    stored = build_codeword(data, cfg)
    view = symbol_view(stored)
    assert view.size == 16 * cfg.d + cfg.q
    assert not syndromes(view, cfg.geom).any()
    out = rs_decode(view, cfg.geom)
    assert out.error_count == 0
    assert np.array_equal(out.data, bytes_to_symbols(data))
    assert stored.data_bytes() == data.tobytes()


def test_build_accepts_bytes_array_and_chunks():
    cfg = CodewordConfig(2, 4)
    raw = bytes(range(64))
    a = build_codeword(raw, cfg)
    b = build_codeword(np.frombuffer(raw, np.uint8).reshape(2, 32), cfg)
    c = build_codeword([raw[:32], raw[32:]], cfg)
    assert a == b == c
    with pytest.raises(ValueError):
        build_codeword(raw[:63], cfg)
    with pytest.raises(ValueError):
        build_codeword([raw[:32]], cfg)


def test_batch_build_matches_single():
    cfg = CodewordConfig.from_preset(256, "rate-16/17")
    data = np.random.default_rng(1).integers(0, 256, (5, cfg.d, 32), dtype=np.uint8)
    units = build_codewords(data, cfg)
    for i in range(5):
        assert np.array_equal(units[i], build_codeword(data[i], cfg).units)


def test_image_matches_independent_oracle():
    cfg = CodewordConfig(2, 17)  # parity needs two chunks, the second mostly pad
    data = bytes((7 * i + 3) & 0xFF for i in range(64))
    syms = [int.from_bytes(data[i:i + 2], "big") for i in range(0, 64, 2)]
    parity = b"".join(p.to_bytes(2, "big") for p in ref_encode(syms, 17))
    payload = data + parity + bytes(2 * 32 - len(parity))
    expect = b"".join(payload[i:i + 32] + crc16_bitwise(payload[i:i + 32]).to_bytes(2, "big")
                      for i in range(0, len(payload), 32))
    assert build_codeword(data, cfg).to_bytes() == expect


def test_channel_mapping():
    cfg = CodewordConfig(4, 4, stripe_width=4)
    assert map_chunk_to_channel(cfg, 0) == (0, 0)
    assert map_chunk_to_channel(cfg, 4) == (0, 1)
    cfg5 = CodewordConfig(8, 4, stripe_width=4)
    assert map_chunk_to_channel(cfg5, 5) == (1, 1)
    with pytest.raises(ValueError):
        map_chunk_to_channel(cfg, cfg.wire_chunks)


def test_striping_is_balanced_bijection():
    cfg = CodewordConfig.from_preset(2048, "rate-16/17", stripe_width=16)
    assert cfg.wire_chunks == 68
    coords = [map_chunk_to_channel(cfg, i) for i in range(68)]
    assert len(set(coords)) == 68
    counts = np.bincount([c for c, _ in coords], minlength=16)
    assert counts.max() - counts.min() <= 1
    assert set(counts.tolist()) == {4, 5}


def test_symbol_view_details():
    cfg = CodewordConfig(2, 4)
    assert not symbol_view(np.zeros((3, 34), np.uint8), cfg).any()
    stored = build_codeword(bytes(range(64)), cfg)
    clean = symbol_view(stored)
    hit = stored.copy()
    hit.units[1, 9] ^= 0x40
    diff = np.flatnonzero(symbol_view(hit) != clean)
    assert diff.tolist() == [16 + 4]


def test_pad_bytes_are_crc_covered_but_not_rs_symbols():
    cfg = CodewordConfig(2, 3)  # 6 parity bytes, 26 pad bytes
    stored = build_codeword(bytes(range(64)), cfg)
    clean = symbol_view(stored)
    hit = stored.copy()
    hit.units[2, 20] ^= 1
    assert np.array_equal(symbol_view(hit), clean)
    assert not hit.clean()


def test_dump_header_and_round_trip():
    cfg = CodewordConfig.from_preset(64, "fixed-parity", stripe_width=8)
    assert dump_header(cfg) == b"HBMC" + struct.pack(">IIHH", 2, 16, 8, 2)
    assert len(dump_header(cfg)) == 16
    stored = build_codeword(bytes(64), cfg)
    raw = dump_codeword(stored)
    assert len(raw) == 16 + 3 * 34
    cfg2, units = load_dump(raw)
    assert cfg2 == cfg and np.array_equal(units[0], stored.units)
    assert dump_header(CodewordConfig(3, 5))[-2:] == b"\x00\x00"
    with pytest.raises(ValueError):
        load_dump(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        load_dump(raw[:-1])


def test_store_lazy_and_eager_agree():
    cfg = CodewordConfig.from_preset(128, "fixed-parity")
    eager = MemoryStore.random(cfg, 40, seed=3)
    lazy = MemoryStore.random(cfg, 40, seed=3, lazy=True)
    for cw in (39, 0, 17):
        assert np.array_equal(lazy.image(cw), eager.units[cw])
    a, b = io.BytesIO(), io.BytesIO()
    eager.dump(a)
    lazy.dump(b)
    assert a.getvalue() == b.getvalue()
    cfg2, units = load_dump(a.getvalue())
    assert units.shape == (40, cfg.wire_chunks, 34)
    assert np.array_equal(eager.truth[5], eager.codeword(5).units[:cfg.d, :32])
    with pytest.raises(ValueError):
        eager.image(40)
