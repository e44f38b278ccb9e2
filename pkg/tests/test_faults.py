import numpy as np
import pytest
from scipy import stats

from hbmecc.faults import (
    FaultConfig,
    apply_flips,
    count_corrupted_units,
    flip_positions,
    inject,
    substream,
    unit_error_prob,
)
from hbmecc.layout import CodewordConfig, build_codeword
from oracles import ref_unit_error_prob, three_sigma


def first_bits(rng):
    return rng.integers(0, 2**63, size=2, dtype=np.int64).tolist()


def test_substream_determinism_and_distinctness():
    assert first_bits(substream(9, (3, 1))) == first_bits(substream(9, (3, 1)))
    assert first_bits(substream(9, (3, 1))) != first_bits(substream(9, (2, 1)))
    assert first_bits(substream(9, (3, 1))) != first_bits(substream(8, (3, 1)))
    assert first_bits(substream(9, 4)) == first_bits(substream(9, (4,)))


def test_substream_no_collisions():
    heads = {int(substream(1, (cw, ep)).integers(0, 2**63)) for cw in range(100) for ep in range(100)}
    assert len(heads) == 10_000


def test_fault_config_validation():
    with pytest.raises(ValueError):
        FaultConfig(1.5)
    with pytest.raises(ValueError):
        FaultConfig(-0.1)
    with pytest.raises(ValueError):
        FaultConfig(0.1, master_seed=-1)


def test_flip_bit_order_is_msb_first():
    buf = np.zeros(2, dtype=np.uint8)
    apply_flips(buf, np.array([0, 15]))
    assert buf.tolist() == [0x80, 0x01]


def test_inject_zero_and_one():
    cfg = CodewordConfig(16, 16)
    stored = build_codeword(bytes(range(256)) * 2, cfg)
    original = stored.copy()
    assert inject(stored, FaultConfig(0.0, 1), (0, 0)) == 0
    assert stored == original
    assert inject(stored, FaultConfig(1.0, 1), (0, 0)) == 17 * 272
    assert np.array_equal(stored.units, original.units ^ 0xFF)
    inject(stored, FaultConfig(1.0, 1), (0, 1))
    assert stored == original


def test_inject_is_reproducible():
    cfg = CodewordConfig(16, 16)
    a = build_codeword(bytes(512), cfg)
    b = build_codeword(bytes(512), cfg)
    fc = FaultConfig(0.01, 77)
    assert inject(a, fc, (5, 2)) == inject(b, fc, (5, 2)) > 0
    assert a == b


def test_mean_flip_count():
    cfg = CodewordConfig(16, 16)
    clean = build_codeword(bytes(512), cfg)
    fc = FaultConfig(1e-3, 5)
    trials = 10_000
    total = sum(inject(clean.copy(), fc, (0, t)) for t in range(trials))
    n, p = trials * 17 * 272, 1e-3
    assert abs(total / trials - 4.624) <= three_sigma(n, p) / trials


@pytest.mark.parametrize("p,method", [(1e-3, "skip"), (1e-3, "bernoulli"), (2e-6, "skip")])
def test_per_bit_rate(p, method):
    rng = np.random.default_rng(11)
    nbits = 10_000_000 if p > 1e-5 else 500_000_000
    pos = flip_positions(rng, nbits, p, method)
    assert np.all(np.diff(pos) > 0) and pos[-1] < nbits
    assert abs(pos.size - nbits * p) <= three_sigma(nbits, p)


def test_skip_sampling_matches_bernoulli():
    rng_a = np.random.default_rng(12)
    rng_b = np.random.default_rng(13)
    nbits, p, trials = 2000, 1e-2, 4000
    skip = [flip_positions(rng_a, nbits, p, "skip") for _ in range(trials)]
    naive = [flip_positions(rng_b, nbits, p, "bernoulli") for _ in range(trials)]
    # counts per trial: same binomial distribution
    counts = np.array([[c.size for c in skip], [c.size for c in naive]])
    edges = np.array([0, 12, 15, 18, 20, 22, 25, 28, 10_000])
    table = np.array([np.histogram(row, edges)[0] for row in counts])
    assert stats.chi2_contingency(table)[1] > 0.01
    # positions: same (uniform) distribution over the block
    pa = np.concatenate(skip)
    pb = np.concatenate(naive)
    assert stats.ks_2samp(pa, pb).pvalue > 0.01


def test_flip_positions_uniform_across_unit_bits():
    rng = np.random.default_rng(14)
    pos = flip_positions(rng, 272 * 200_000, 1e-3)
    chunk_bit = np.bincount(pos % 272, minlength=272)
    assert stats.chisquare(chunk_bit).pvalue > 0.01
    unit = np.bincount((pos // 272) % 17, minlength=17)
    assert stats.chisquare(unit).pvalue > 0.01


def test_unknown_method():
    with pytest.raises(ValueError):
        flip_positions(np.random.default_rng(), 10, 0.5, "magic")


def test_unit_error_prob():
    assert unit_error_prob(0.0) == 0.0
    assert unit_error_prob(1.0) == 1.0
    assert unit_error_prob(1e-7, 272) == pytest.approx(2.7e-5, rel=0.01)
    assert unit_error_prob(1e-3, 272) == pytest.approx(ref_unit_error_prob(1e-3, 272), rel=1e-12)
    # the quoted 0.2383 is rounded; the exact value is 0.238249...
    assert unit_error_prob(1e-3, 272) == pytest.approx(0.2383, abs=1e-4)
    assert unit_error_prob(1e-15, 272) == pytest.approx(272e-15, rel=1e-9)
    with pytest.raises(ValueError):
        unit_error_prob(2.0)


def test_count_corrupted_units_small():
    rng = np.random.default_rng(15)
    n, p = 2_000_000, 1e-4
    hits = count_corrupted_units(p, n, rng, block_units=700_000)
    q = unit_error_prob(p)
    assert abs(hits - n * q) <= three_sigma(n, q)
