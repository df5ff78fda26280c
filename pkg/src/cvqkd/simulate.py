"""Sample-level Monte Carlo simulation of the prepare-and-measure protocol.

Each record draws Alice's P symbol from N(0, mu - 1), prepares the signal
quadratures with vacuum plus preparation noise, applies the per-quadrature
lossy channel x -> sqrt(T_X) x + sqrt(1 - T_X) e_X with eavesdropper noise
variance W_X, and detects with switched homodyne or heterodyne.

Randomness comes from the counter-based Philox4x64 generator with a fixed
budget of 12 uniform words per record, turned into normals by the
Box-Muller transform.  Record i always consumes words [12i, 12i + 12), so
generating any index range reproduces exactly the same samples as one
serial pass: streams are deterministic, partitionable and mergeable.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .protocol import ChannelParams, SourceParams

RECORD_DTYPE = np.dtype([
    ("index", "u8"),
    ("basis", "U1"),     # 'Q' | 'P' | 'B' (both, heterodyne)
    ("alice_p", "f8"),
    ("bob_q", "f8"),
    ("bob_p", "f8"),
])

CSV_COLUMNS = ("index", "basis", "alice_p", "bob_q", "bob_p")

WORDS_PER_RECORD = 12
# numpy's Philox.advance steps the 128-bit counter, i.e. blocks of four
# 64-bit outputs; 12 words per record keeps records block-aligned.
_BLOCKS_PER_RECORD = WORDS_PER_RECORD // 4
_CHUNK = 1 << 17

LOSS_EMULATIONS = ("channel", "modulation")


@dataclass(frozen=True)
class SimConfig:
    """Run length, seed, detection scheme and physical parameters.

    detection 'homodyne' switches the measured basis per record with
    probability switch_prob_p for P.  loss_emulation 'modulation' mimics the
    alternative experimental procedure for heterodyne: the channel is left
    at unit transmission and the modulation plus preparation noise variances
    are scaled by t_p instead (valid for w = 1); scale_detection_vacuum
    additionally scales the heterodyne vacuum unit by t_p under that mode.
    """

    n_samples: int
    seed: int
    source: SourceParams
    channel: ChannelParams
    detection: str = "heterodyne"
    switch_prob_p: float = 0.5
    loss_emulation: str = "channel"
    scale_detection_vacuum: bool = False

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.detection not in ("homodyne", "heterodyne"):
            raise ValueError("detection must be 'homodyne' or 'heterodyne'")
        if not 0.0 < self.switch_prob_p < 1.0:
            raise ValueError("switch_prob_p must lie in (0, 1)")
        if self.loss_emulation not in LOSS_EMULATIONS:
            raise ValueError(f"loss_emulation must be one of {LOSS_EMULATIONS}")
        if self.loss_emulation == "modulation" and self.channel.t_q != self.channel.t_p:
            raise ValueError("modulation-emulation mode uses one transmission; set t_q == t_p")


def simulate(config: SimConfig, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Generate records [start, stop) as a structured array.

    Identical (seed, config) always yield bit-identical streams, and
    simulate(cfg, a, b) equals the corresponding slice of simulate(cfg).
    """
    stop = config.n_samples if stop is None else stop
    if not 0 <= start <= stop <= config.n_samples:
        raise ValueError("invalid record range")
    out = np.empty(stop - start, dtype=RECORD_DTYPE)
    pos = 0
    for lo in range(start, stop, _CHUNK):
        hi = min(lo + _CHUNK, stop)
        _fill_chunk(config, lo, hi, out[pos:pos + (hi - lo)])
        pos += hi - lo
    return out


def _fill_chunk(config: SimConfig, lo: int, hi: int, out: np.ndarray) -> None:
    bitgen = np.random.Philox(key=config.seed)
    bitgen.advance(lo * _BLOCKS_PER_RECORD)
    u = np.random.Generator(bitgen).random((hi - lo, WORDS_PER_RECORD))

    # Box-Muller on the five (even, odd) column pairs -> ten unit normals.
    radius = np.sqrt(-2.0 * np.log1p(-u[:, 0:10:2]))
    angle = 2.0 * np.pi * u[:, 1:10:2]
    za = radius * np.cos(angle)   # alice, vac_p, prep_p, eve_p, idler_p
    zb = radius * np.sin(angle)   # vac_q, prep_q, eve_q, idler_q, spare

    src, ch = config.source, config.channel
    emulated = config.loss_emulation == "modulation"
    t_q, t_p = ch.t_q, ch.t_p
    mod_var = src.mu - 1.0
    kappa_q, kappa_p = src.kappa_q, src.kappa_p
    if emulated:
        # unit-transmission channel; loss folded into the modulator drive
        mod_var *= t_p
        kappa_q *= t_p
        kappa_p *= t_p
        t_q = t_p = 1.0

    alice = np.sqrt(mod_var) * za[:, 0]
    q = zb[:, 0] + np.sqrt(kappa_q) * zb[:, 1]
    p = alice + za[:, 1] + np.sqrt(kappa_p) * za[:, 2]
    q = np.sqrt(t_q) * q + np.sqrt((1.0 - t_q) * ch.w_q) * zb[:, 2]
    p = np.sqrt(t_p) * p + np.sqrt((1.0 - t_p) * ch.w_p) * za[:, 3]

    out["index"] = np.arange(lo, hi, dtype=np.uint64)
    out["alice_p"] = alice
    if config.detection == "heterodyne":
        vac = ch.t_p if (emulated and config.scale_detection_vacuum) else 1.0
        out["basis"] = "B"
        out["bob_q"] = (q + np.sqrt(vac) * zb[:, 3]) / np.sqrt(2.0)
        out["bob_p"] = (p + np.sqrt(vac) * za[:, 4]) / np.sqrt(2.0)
    else:
        p_basis = u[:, 10] < config.switch_prob_p
        out["basis"] = np.where(p_basis, "P", "Q")
        out["bob_q"] = np.where(p_basis, np.nan, q)
        out["bob_p"] = np.where(p_basis, p, np.nan)


def expected_moments(config: SimConfig) -> dict:
    """Exact second moments of (alice_p, bob_q, bob_p) for the configuration.

    Keys: var_alice, var_bob_q, var_bob_p, cov_alice_bob_p.  Correlations
    with bob_q vanish by construction.
    """
    src, ch = config.source, config.channel
    if config.loss_emulation == "modulation":
        t = ch.t_p
        va = t * (src.mu - 1.0)
        vq = 1.0 + t * src.kappa_q
        vp = va + 1.0 + t * src.kappa_p
        c = va
        vac = t if config.scale_detection_vacuum else 1.0
    else:
        va = src.mu - 1.0
        vq = ch.t_q * (1.0 + src.kappa_q) + (1.0 - ch.t_q) * ch.w_q
        vp = ch.t_p * (src.mu + src.kappa_p) + (1.0 - ch.t_p) * ch.w_p
        c = np.sqrt(ch.t_p) * va
        vac = 1.0
    if config.detection == "heterodyne":
        return {
            "var_alice": va,
            "var_bob_q": (vq + vac) / 2.0,
            "var_bob_p": (vp + vac) / 2.0,
            "cov_alice_bob_p": c / np.sqrt(2.0),
        }
    return {"var_alice": va, "var_bob_q": vq, "var_bob_p": vp, "cov_alice_bob_p": c}


def config_metadata(config: SimConfig) -> dict:
    """JSON-serialisable echo of a simulation configuration."""
    return {
        "n_samples": config.n_samples,
        "seed": config.seed,
        "detection": config.detection,
        "switch_prob_p": config.switch_prob_p,
        "loss_emulation": config.loss_emulation,
        "scale_detection_vacuum": config.scale_detection_vacuum,
        "source": dataclasses.asdict(config.source),
        "channel": dataclasses.asdict(config.channel),
        "rng": f"Philox4x64, {WORDS_PER_RECORD} words/record, Box-Muller",
    }


def write_records(dest, records: np.ndarray, meta: dict | None = None,
                  fmt: str = "csv") -> None:
    """Write records as CSV or NDJSON with a JSON metadata header line.

    `dest` is a path or an open text file.
    """
    meta = dict(meta or {})
    if fmt not in ("csv", "ndjson"):
        raise ValueError("fmt must be 'csv' or 'ndjson'")
    own = not hasattr(dest, "write")
    fh = open(dest, "w") if own else dest
    try:
        if fmt == "csv":
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for rec in records:
                fh.write("%d,%s,%s,%s,%s\n" % (
                    rec["index"], rec["basis"], _fmt(rec["alice_p"]),
                    _fmt(rec["bob_q"]), _fmt(rec["bob_p"])))
        else:
            fh.write(json.dumps({"_meta": meta}, sort_keys=True) + "\n")
            for rec in records:
                fh.write(json.dumps({
                    "index": int(rec["index"]),
                    "basis": str(rec["basis"]),
                    "alice_p": float(rec["alice_p"]),
                    "bob_q": _opt(rec["bob_q"]),
                    "bob_p": _opt(rec["bob_p"]),
                }) + "\n")
    finally:
        if own:
            fh.close()


def read_records(path):
    """Read a CSV or NDJSON record file; returns (records, metadata dict)."""
    with open(path) as fh:
        first = fh.readline()
        if first.startswith("#"):
            meta = json.loads(first[1:].strip() or "{}")
            header = fh.readline().strip().split(",")
            if tuple(header) != CSV_COLUMNS:
                raise ValueError(f"unexpected CSV columns {header}")
            rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
            out = np.empty(len(rows), dtype=RECORD_DTYPE)
            for i, row in enumerate(rows):
                out[i] = (int(row[0]), row[1], _parse(row[2]), _parse(row[3]), _parse(row[4]))
            return out, meta
        obj = json.loads(first)
        meta = obj.get("_meta", {})
        rows = [json.loads(line) for line in fh if line.strip()]
        out = np.empty(len(rows), dtype=RECORD_DTYPE)
        for i, row in enumerate(rows):
            out[i] = (row["index"], row["basis"], row["alice_p"],
                      _nan(row["bob_q"]), _nan(row["bob_p"]))
        return out, meta


def _fmt(x: float) -> str:
    return "" if np.isnan(x) else repr(float(x))


def _parse(s: str) -> float:
    return np.nan if s == "" else float(s)


def _opt(x: float):
    return None if np.isnan(x) else float(x)


def _nan(x):
    return np.nan if x is None else float(x)
