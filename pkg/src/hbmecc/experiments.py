"""Config-driven experiment sweeps with deterministic CSV output.

A config is a TOML file::

    experiment = "sweep_codeword"
    master_seed = 7
    output = "results/sweep_codeword.csv"

    [grid]
    ber = [0.0, 1e-9, 1e-3]
    codeword_bytes = [64, 2048]

    [trace]
    requests = 5000

Every grid key takes a list (a scalar is read as a one-element list).  The
full cartesian product is run, one CSV row per point, rows sorted by grid
key.  Each point draws its randomness from a seed derived from
``master_seed`` and the point's workload parameters only, so protection
modes, presets and policies at the same workload see the same trace and the
same fault stream.
"""

import csv
import io
import itertools
import json
import math
import os
import re
import struct
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .bitplane import BF16_FIELDS, FLIP_STATS_HEADER, field_flip_stats, flip_stats_row, random_bf16
from .controller import SequentialReadPolicy
from .faults import FaultConfig
from .layout import PRESETS, CodewordConfig
from .perf import (
    DEFAULT_K_DISTRIBUTION,
    DEFAULT_STORE_CODEWORDS,
    PROTECTION_MODES,
    RESULTS_HEADER,
    TraceParams,
    decode_failure_rate,
    g6,
    gen_trace,
    log_decode_failure_rate,
    results_row,
    run_trace,
)

U64 = 1 << 64

FAILURE_CURVE_HEADER = ["preset", "codeword_bytes", "d", "q", "ber",
                        "analytic_failure_rate", "log10_failure_rate"]

_PERF_OPTIONAL = {
    "preset": ["fixed-parity"],
    "seq_ratio": [0.99],
    "read_fraction": [1.0],
    "policy": ["crc_first"],
    "protection": ["full"],
}

# experiment -> (required grid keys, optional grid keys with defaults, extra table)
EXPERIMENTS = {
    "failure_curve": (("ber", "codeword_bytes"), {"preset": ["rate-16/17"]}, None),
    "sweep_codeword": (("ber", "codeword_bytes"), _PERF_OPTIONAL, "trace"),
    "sweep_random_ratio": (("ber", "codeword_bytes", "seq_ratio"), _PERF_OPTIONAL, "trace"),
    "adaptive_bandwidth": (("ber", "codeword_bytes", "protection"), _PERF_OPTIONAL, "trace"),
    "single_run": (("ber", "codeword_bytes"), _PERF_OPTIONAL, "trace"),
    "bitfield_sweep": (("field", "rate"), {}, "sample"),
}

TABLE_DEFAULTS = {
    "trace": {
        "requests": 5000,
        "store_codewords": DEFAULT_STORE_CODEWORDS,
        "random_k_distribution": list(DEFAULT_K_DISTRIBUTION),
    },
    "sample": {"values": 1_000_000},
}

# sort order of grid keys in the output
GRID_ORDER = ("preset", "codeword_bytes", "ber", "seq_ratio", "read_fraction", "policy",
              "protection", "field", "rate")


class ConfigError(ValueError):
    """Invalid config; ``diagnostics`` lists every problem found."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(self.diagnostics))


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    grid: dict
    master_seed: int = 0
    output: str = None
    trace: dict = field(default_factory=dict)
    sample: dict = field(default_factory=dict)

    def canonical(self):
        """Plain-data form with every default filled in."""
        out = {"experiment": self.experiment, "master_seed": self.master_seed,
               "grid": {k: list(v) for k, v in sorted(self.grid.items())}}
        if self.output is not None:
            out["output"] = self.output
        extra = EXPERIMENTS[self.experiment][2]
        if extra:
            out[extra] = dict(sorted(getattr(self, extra).items()))
        return out

    def echo(self):
        return json.dumps(self.canonical(), indent=2, sort_keys=True) + "\n"

    def points(self):
        """Grid points as dicts, in output order."""
        keys = sorted(self.grid, key=GRID_ORDER.index)
        pts = [dict(zip(keys, combo)) for combo in itertools.product(*(self.grid[k] for k in keys))]
        pts.sort(key=lambda p: tuple(p[k] for k in keys))
        return pts


# -- validation --------------------------------------------------------------

def _key_lines(text):
    """Map ``section.key`` (or bare ``key``) to the line that assigns it."""
    lines = {}
    section = ""
    for no, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[\s*([A-Za-z0-9_.\-]+)\s*\]", line)
        if m:
            section = m.group(1)
            lines.setdefault(section, no)
            continue
        m = re.match(r"\s*([A-Za-z0-9_\-]+)\s*=", line)
        if m:
            lines.setdefault(f"{section}.{m.group(1)}" if section else m.group(1), no)
    return lines


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _unit_interval(v):
    if not _is_num(v):
        return "expected a number"
    if not 0.0 <= v <= 1.0 or math.isnan(v):
        return f"value {v} outside [0, 1]"
    return None


def _choice(options):
    def check(v):
        if v not in options:
            return f"{v!r} is not one of {sorted(options)}"
        return None
    return check


def _codeword_bytes(v):
    if not _is_int(v):
        return "expected an integer byte count"
    if v < 32 or v % 32:
        return f"{v} is not a positive multiple of 32"
    return None


GRID_CHECKS = {
    "ber": _unit_interval,
    "codeword_bytes": _codeword_bytes,
    "preset": _choice(set(PRESETS)),
    "seq_ratio": _unit_interval,
    "read_fraction": _unit_interval,
    "policy": _choice({p.value for p in SequentialReadPolicy}),
    "protection": _choice(set(PROTECTION_MODES)),
    "field": _choice(set(BF16_FIELDS)),
    "rate": _unit_interval,
}


def _positive_int(v):
    if not _is_int(v) or v < 1:
        return f"expected a positive integer, got {v!r}"
    return None


def _k_distribution(v):
    if not isinstance(v, list) or not v or not all(_is_num(x) and x >= 0 for x in v):
        return "expected a non-empty list of non-negative probabilities"
    if abs(sum(v) - 1.0) > 1e-9:
        return f"probabilities sum to {sum(v):g}, not 1"
    return None


TABLE_CHECKS = {
    "trace": {"requests": _positive_int, "store_codewords": _positive_int,
              "random_k_distribution": _k_distribution},
    "sample": {"values": _positive_int},
}


def validate_config(text):
    """Parse and check a TOML config; raise :class:`ConfigError` on any problem."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"syntax: {exc}"]) from None
    where = _key_lines(text)
    diags = []

    def bad(key, msg):
        line = where.get(key)
        diags.append(f"line {line}: {key}: {msg}" if line else f"{key}: {msg}")

    experiment = raw.get("experiment")
    if experiment is None:
        bad("experiment", f"missing; choose from {sorted(EXPERIMENTS)}")
        raise ConfigError(diags)
    if experiment not in EXPERIMENTS:
        bad("experiment", f"{experiment!r} is not one of {sorted(EXPERIMENTS)}")
        raise ConfigError(diags)
    required, optional, extra = EXPERIMENTS[experiment]

    allowed_top = {"experiment", "master_seed", "output", "grid"} | ({extra} if extra else set())
    for key in sorted(set(raw) - allowed_top):
        bad(key, "unknown key")

    seed = raw.get("master_seed", 0)
    if not _is_int(seed) or not 0 <= seed < U64:
        bad("master_seed", "expected an unsigned 64-bit integer")
    output = raw.get("output")
    if output is not None and (not isinstance(output, str) or not output):
        bad("output", "expected a non-empty path string")

    grid_raw = raw.get("grid")
    grid = {}
    if not isinstance(grid_raw, dict):
        bad("grid", "missing [grid] table")
        grid_raw = {}
    for key in sorted(set(grid_raw) - set(required) - set(optional)):
        bad(f"grid.{key}", "unknown key for experiment " + experiment)
    for key in required:
        if key not in grid_raw:
            bad(f"grid.{key}", f"required by {experiment} but missing")
    for key in (*required, *optional):
        if key not in grid_raw:
            if key in optional:
                grid[key] = tuple(optional[key])
            continue
        vals = grid_raw[key]
        vals = vals if isinstance(vals, list) else [vals]
        if not vals:
            bad(f"grid.{key}", "empty list")
            continue
        for v in vals:
            msg = GRID_CHECKS[key](v)
            if msg:
                bad(f"grid.{key}", msg)
                break
        else:
            if len(set(vals)) != len(vals):
                bad(f"grid.{key}", "duplicate values")
            else:
                grid[key] = tuple(float(v) if key not in ("codeword_bytes",) and _is_num(v)
                                  else v for v in vals)

    if "codeword_bytes" in grid:
        for cwb in grid["codeword_bytes"]:
            for preset in grid.get("preset", ()):
                try:
                    CodewordConfig.from_preset(cwb, preset)
                except ValueError as exc:
                    bad("grid.codeword_bytes", f"{cwb} with {preset}: {exc}")

    tables = {}
    if extra:
        given = raw.get(extra, {})
        if not isinstance(given, dict):
            bad(extra, "expected a table")
            given = {}
        checks = TABLE_CHECKS[extra]
        for key in sorted(set(given) - set(checks)):
            bad(f"{extra}.{key}", "unknown key")
        merged = dict(TABLE_DEFAULTS[extra])
        for key, check in checks.items():
            if key in given:
                msg = check(given[key])
                if msg:
                    bad(f"{extra}.{key}", msg)
                else:
                    merged[key] = given[key]
        tables[extra] = merged

    if experiment == "single_run" and not diags:
        multi = [k for k, v in grid.items() if len(v) != 1]
        for key in multi:
            bad(f"grid.{key}", "single_run takes exactly one value per key")

    if diags:
        raise ConfigError(diags)
    return ExperimentConfig(experiment, grid, seed, output, **tables)


def load_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc.strerror}"]) from None
    return validate_config(text)


# -- execution -----------------------------------------------------------------

def _float_bits(x):
    return struct.unpack(">Q", struct.pack(">d", float(x)))[0]


def point_seed(master_seed, *parts):
    """64-bit seed from the master seed and workload parameters (ints or floats)."""
    key = tuple(p if isinstance(p, int) else _float_bits(p) for p in parts)
    ss = np.random.SeedSequence(master_seed, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def _failure_curve_row(point, master_seed, extra):
    cfg = CodewordConfig.from_preset(point["codeword_bytes"], point["preset"])
    ber = point["ber"]
    log_rate = log_decode_failure_rate(ber, cfg)
    log10 = log_rate / math.log(10) if math.isfinite(log_rate) else -math.inf
    return [cfg.preset, cfg.codeword_bytes, cfg.d, cfg.q, g6(ber),
            g6(decode_failure_rate(ber, cfg)), g6(log10)]


def _perf_row(point, master_seed, extra):
    cfg = CodewordConfig.from_preset(point["codeword_bytes"], point["preset"])
    seed = point_seed(master_seed, point["codeword_bytes"], point["ber"], point["seq_ratio"],
                      point["read_fraction"])
    tp = TraceParams(extra["requests"], point["seq_ratio"],
                     tuple(extra["random_k_distribution"]), point["read_fraction"], seed)
    trace = gen_trace(tp, cfg.d, extra["store_codewords"])
    stats = run_trace(trace, cfg, FaultConfig(point["ber"], seed), point["policy"],
                      PROTECTION_MODES[point["protection"]](), store_seed=master_seed)
    return results_row(preset=cfg.preset, config=cfg, ber=point["ber"],
                       seq_ratio=point["seq_ratio"], read_fraction=point["read_fraction"],
                       policy=point["policy"], protection=point["protection"], seed=seed,
                       stats=stats)


@lru_cache(maxsize=2)
def _bf16_sample(master_seed, count):
    return random_bf16(count, np.random.default_rng(master_seed))


def _bitfield_row(point, master_seed, extra):
    values = _bf16_sample(master_seed, extra["values"])
    field_id = sorted(BF16_FIELDS).index(point["field"])
    seed = point_seed(master_seed, field_id, point["rate"])
    return flip_stats_row(field_flip_stats(values, point["field"], point["rate"], seed))


_ROW_FUNCS = {
    "failure_curve": (_failure_curve_row, FAILURE_CURVE_HEADER),
    "sweep_codeword": (_perf_row, RESULTS_HEADER),
    "sweep_random_ratio": (_perf_row, RESULTS_HEADER),
    "adaptive_bandwidth": (_perf_row, RESULTS_HEADER),
    "single_run": (_perf_row, RESULTS_HEADER),
    "bitfield_sweep": (_bitfield_row, FLIP_STATS_HEADER),
}


def _run_point(task):
    experiment, point, master_seed, extra = task
    return _ROW_FUNCS[experiment][0](point, master_seed, extra)


def run_rows(config, jobs=1):
    """Header and rows for every grid point; rows come back in grid order."""
    extra_name = EXPERIMENTS[config.experiment][2]
    extra = getattr(config, extra_name) if extra_name else {}
    tasks = [(config.experiment, p, config.master_seed, extra) for p in config.points()]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_point, tasks, chunksize=1))
    else:
        rows = [_run_point(t) for t in tasks]
    return _ROW_FUNCS[config.experiment][1], rows


def render_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_atomic(path, text):
    """Write via a temp file in the same directory, renamed into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_config(config, out=None, jobs=1):
    """Run the whole grid and return the CSV text; also written to ``out`` if given."""
    header, rows = run_rows(config, jobs)
    text = render_csv(header, rows)
    if out is not None:
        write_atomic(out, text)
    return text


def with_overrides(config, seed=None, output=None):
    if seed is not None:
        config = replace(config, master_seed=seed)
    if output is not None:
        config = replace(config, output=str(output))
    return config
