"""Seeded Monte Carlo orchestration of the SINR and throughput experiments,
metric helpers, and the discovery-overhead calculator.

Every drop gets its own random stream derived solely from (seed, drop_index):
the 64-bit seed is XOR-folded with the drop index through a splitmix64
finalizer. Adding or removing drops therefore never perturbs other drops, and
identical configurations produce byte-identical reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import (
    ChannelConfig,
    build_coupling_table,
    sector_endpoint,
    ue_endpoint,
)
from .layout import (
    NetworkLayout,
    build_hex_grid,
    drop_cellular_ues,
    drop_d2d_pairs,
)
from .radio import PowerControlConfig, RadioConfig, open_loop_tx_power, thermal_noise_dbm
from .scheduling import (
    UNCOORDINATED,
    CoordinationMode,
    Flow,
    assign_d2d_slots,
    cycle_length,
    positions_per_tx,
    run_pf_uplink,
)

_MASK64 = (1 << 64) - 1

SINR_SAMPLE_DTYPE = np.dtype(
    [
        ("setting_id", np.int32),
        ("drop", np.int32),
        ("sector", np.int32),
        ("link", np.int32),
        ("sinr_db", np.float64),
    ]
)

THROUGHPUT_SAMPLE_DTYPE = np.dtype(
    [
        ("drop", np.int32),
        ("flow", np.int32),
        ("role", "U8"),
        ("throughput_bps", np.float64),
    ]
)


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def drop_stream_seed(seed: int, drop_index: int) -> int:
    """Stream seed for one drop; independent of every other drop index."""
    return _splitmix64((seed & _MASK64) ^ _splitmix64(drop_index))


@dataclass(frozen=True)
class PowerSetting:
    """One sweep point; alpha None means no power control (max power)."""

    alpha: Optional[float]
    snr_target_db: Optional[float]

    @property
    def is_no_pc(self) -> bool:
        return self.alpha is None

    @property
    def label(self) -> str:
        if self.is_no_pc:
            return "no_power_control"
        return f"alpha={self.alpha:g} snr_target_db={self.snr_target_db:g}"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "sinr"
    isd_m: float = 1732.0
    n_rings: int = 2
    wraparound: bool = True
    n_cellular_per_sector: int = 0
    n_d2d_tx_per_sector: int = 10
    d2d_range_m: float = 250.0
    min_d2d_dist_m: float = 3.0
    coordination: CoordinationMode = UNCOORDINATED
    alpha_list: tuple[float, ...] = (0.0, 0.8, 1.0)
    snr_target_db_list: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0)
    no_power_control: bool = True
    n_drops: int = 100
    n_subframes: int = 2000
    k_d2d: int = 0
    seed: int = 1
    carrier_ghz: float = 0.7
    d2d_offset_db: float = -10.0
    out_dir: str = "runs"

    def validate(self) -> None:
        if self.experiment not in ("sinr", "throughput"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.isd_m <= 0:
            raise ValueError("isd_m must be positive")
        if self.n_rings < 0:
            raise ValueError("n_rings must be >= 0")
        if self.n_cellular_per_sector < 0 or self.n_d2d_tx_per_sector < 0:
            raise ValueError("terminal counts must be >= 0")
        if not 0.0 < self.min_d2d_dist_m < self.d2d_range_m:
            raise ValueError("need 0 < min_d2d_dist_m < d2d_range_m")
        if any(not 0.0 <= a <= 1.0 for a in self.alpha_list):
            raise ValueError("alpha values must be in [0, 1]")
        if bool(self.alpha_list) != bool(self.snr_target_db_list):
            raise ValueError("alpha_list and snr_target_db_list must both be set or both empty")
        if not (self.alpha_list or self.no_power_control):
            raise ValueError("power-control sweep is empty")
        if self.n_drops < 1:
            raise ValueError("n_drops must be >= 1")
        if self.n_subframes < 1:
            raise ValueError("n_subframes must be >= 1")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must fit in 64 bits")
        if self.k_d2d < 0:
            raise ValueError("k_d2d must be >= 0")
        if self.experiment == "throughput" and self.k_d2d > self.n_d2d_tx_per_sector:
            raise ValueError("k_d2d exceeds the number of transmitters per sector")
        if self.carrier_ghz <= 0:
            raise ValueError("carrier_ghz must be positive")


def sweep_settings(cfg: ExperimentConfig) -> list[PowerSetting]:
    settings = [
        PowerSetting(a, t) for a in cfg.alpha_list for t in cfg.snr_target_db_list
    ]
    if cfg.no_power_control:
        settings.append(PowerSetting(None, None))
    if not settings:
        raise ValueError("power-control sweep is empty")
    return settings


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    experiment: str  # "sinr" | "throughput"
    settings: tuple[PowerSetting, ...]
    samples: np.ndarray  # SINR_SAMPLE_DTYPE or THROUGHPUT_SAMPLE_DTYPE
    run_label: str = ""  # "baseline" | "offload" for throughput reports


def _setting_pc(setting: PowerSetting, noise_dbm: Optional[float]) -> PowerControlConfig:
    if setting.is_no_pc:
        return PowerControlConfig(
            snr_target_db=0.0, noise_dbm=noise_dbm, alpha=0.0, enabled=False
        )
    return PowerControlConfig(
        snr_target_db=setting.snr_target_db,
        noise_dbm=noise_dbm,
        alpha=setting.alpha,
        enabled=True,
    )


def build_drop(
    cfg: ExperimentConfig,
    layout: NetworkLayout,
    drop_index: int,
    ch_cfg: Optional[ChannelConfig] = None,
):
    """Drop all terminals and freeze the coupling table for one drop index.

    The baseline and offload throughput runs both start from this, which is
    what guarantees them identical geometry and shadowing.
    """
    ch = ch_cfg or ChannelConfig(
        carrier_ghz=cfg.carrier_ghz, d2d_offset_db=cfg.d2d_offset_db
    )
    rng = np.random.default_rng(drop_stream_seed(cfg.seed, drop_index))
    cell = drop_cellular_ues(layout, cfg.n_cellular_per_sector, rng)
    pairs = drop_d2d_pairs(
        layout,
        cfg.n_d2d_tx_per_sector,
        cfg.d2d_range_m,
        cfg.min_d2d_dist_m,
        rng,
        start_id=len(cell),
    )
    ues = cell + [u for pair in pairs for u in pair]
    table = build_coupling_table(layout, ues, ch, rng)
    return cell, pairs, table, ues


def _sinr_drop_samples(cfg, layout, settings, ch_cfg, rc, drop_index) -> np.ndarray:
    cell, pairs, table, _ = build_drop(cfg, layout, drop_index, ch_cfg)
    if not pairs:
        return np.zeros(0, dtype=SINR_SAMPLE_DTYPE)

    mode = cfg.coordination
    n_tx = cfg.n_d2d_tx_per_sector
    txs_by_sector: dict[int, list[int]] = {}
    for tx, _rx in pairs:
        txs_by_sector.setdefault(tx.home_sector, []).append(tx.id)
    slots = assign_d2d_slots(mode, txs_by_sector, cycle_length(mode, n_tx))

    d2d_rows = np.array([table.tx_row(tx.id) for tx, _ in pairs])
    peer_cols = np.array([table.rx_col(rx.id) for _, rx in pairs])
    tx_ids = np.array([tx.id for tx, _ in pairs], dtype=np.int32)
    tx_sector = np.array([tx.home_sector for tx, _ in pairs], dtype=np.int32)
    own_loss = table.ue_ue_loss_db[d2d_rows, peer_cols]

    pair_index = {int(t): j for j, t in enumerate(tx_ids)}
    active_sel = []
    for slot in slots:
        ids = [t for s in sorted(slot.active) for t in slot.active[s]]
        active_sel.append(np.array([pair_index[t] for t in ids], dtype=int))

    gain = table.ue_ue_gain_lin
    noise_ue_dbm = thermal_noise_dbm(rc.bandwidth_hz, rc.noise_figure_ue_db)
    noise_enb_dbm = thermal_noise_dbm(rc.bandwidth_hz, rc.noise_figure_enb_db)
    noise_lin = 10.0 ** (noise_ue_dbm / 10.0)

    if cell:
        cell_rows = np.array([table.tx_row(u.id) for u in cell])
        cell_loss = table.ue_sector_loss_db[
            cell_rows, np.array([u.home_sector for u in cell])
        ]
    chunks = []
    for si, setting in enumerate(settings):
        p_d2d = np.asarray(open_loop_tx_power(_setting_pc(setting, noise_ue_dbm), own_loss))
        p_lin = 10.0 ** (p_d2d / 10.0)
        # Cellular terminals transmit uplink in every subframe; their power is
        # set against their own serving-sector link.
        if cell:
            p_cell = np.asarray(
                open_loop_tx_power(_setting_pc(setting, noise_enb_dbm), cell_loss)
            )
            cell_at_rx = (10.0 ** (p_cell / 10.0)) @ gain[cell_rows]
        else:
            cell_at_rx = np.zeros(gain.shape[1])
        for sel in active_sel:
            rows = d2d_rows[sel]
            cols = peer_cols[sel]
            received = p_lin[sel] @ gain[np.ix_(rows, cols)] + cell_at_rx[cols]
            signal = p_lin[sel] * gain[rows, cols]
            interference = np.maximum(received - signal, 0.0)
            sinr_db = 10.0 * np.log10(signal / (interference + noise_lin))
            chunk = np.zeros(len(sel), dtype=SINR_SAMPLE_DTYPE)
            chunk["setting_id"] = si
            chunk["drop"] = drop_index
            chunk["sector"] = tx_sector[sel]
            chunk["link"] = tx_ids[sel]
            chunk["sinr_db"] = sinr_db
            chunks.append(chunk)
    return np.concatenate(chunks)


def run_sinr_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Per drop: build the geometry, freeze couplings, set powers for every
    sweep setting, and record each direct link's SINR at every activation
    pattern position. All cochannel transmitters interfere."""
    cfg.validate()
    layout = build_hex_grid(cfg.isd_m, cfg.n_rings, cfg.wraparound)
    settings = sweep_settings(cfg)
    ch_cfg = ChannelConfig(carrier_ghz=cfg.carrier_ghz, d2d_offset_db=cfg.d2d_offset_db)
    rc = RadioConfig()
    chunks = [
        _sinr_drop_samples(cfg, layout, settings, ch_cfg, rc, drop)
        for drop in range(cfg.n_drops)
    ]
    samples = (
        np.concatenate(chunks) if chunks else np.zeros(0, dtype=SINR_SAMPLE_DTYPE)
    )
    return ExperimentReport("sinr", tuple(settings), samples)


def expected_sinr_sample_count(cfg: ExperimentConfig, n_sectors: int) -> int:
    """Sample accounting: drops x sectors x links x positions-per-link, per
    sweep setting."""
    per_setting = (
        cfg.n_drops
        * n_sectors
        * cfg.n_d2d_tx_per_sector
        * positions_per_tx(cfg.coordination, cfg.n_d2d_tx_per_sector)
    )
    return per_setting * len(sweep_settings(cfg))


def _throughput_rows(drop_index, sector_flows, result) -> np.ndarray:
    flows = sorted((f for fl in sector_flows.values() for f in fl), key=lambda f: f.id)
    chunk = np.zeros(len(flows), dtype=THROUGHPUT_SAMPLE_DTYPE)
    for i, f in enumerate(flows):
        chunk[i] = (drop_index, f.id, f.role, result.throughput_bps[f.id])
    return chunk


def run_throughput_experiment(
    cfg: ExperimentConfig, k_d2d: int
) -> tuple[ExperimentReport, ExperimentReport]:
    """Paired baseline/offload PF runs on identical drops.

    Baseline: every transmitter is a cellular flow through its serving sector.
    Offload: per sector, the first k_d2d pair transmitters (in drop order)
    send directly to their dropped peers instead. The power-control setting is
    the first entry of the sweep.
    """
    cfg.validate()
    if not 0 <= k_d2d <= cfg.n_d2d_tx_per_sector:
        raise ValueError(
            f"k_d2d must be in [0, {cfg.n_d2d_tx_per_sector}], got {k_d2d}"
        )
    layout = build_hex_grid(cfg.isd_m, cfg.n_rings, cfg.wraparound)
    setting = sweep_settings(cfg)[0]
    ch_cfg = ChannelConfig(carrier_ghz=cfg.carrier_ghz, d2d_offset_db=cfg.d2d_offset_db)
    rc = RadioConfig()
    pc = _setting_pc(setting, None)

    base_chunks, off_chunks = [], []
    for drop in range(cfg.n_drops):
        cell, pairs, table, _ = build_drop(cfg, layout, drop, ch_cfg)

        def flows_for(offload: bool) -> dict[int, list[Flow]]:
            out: dict[int, list[Flow]] = {}
            for u in cell:
                out.setdefault(u.home_sector, []).append(
                    Flow(u.id, u.id, sector_endpoint(u.home_sector))
                )
            offloaded: dict[int, int] = {}
            for tx, rx in pairs:
                s = tx.home_sector
                if offload and offloaded.get(s, 0) < k_d2d:
                    dest = ue_endpoint(rx.id)
                    offloaded[s] = offloaded.get(s, 0) + 1
                else:
                    dest = sector_endpoint(s)
                out.setdefault(s, []).append(Flow(tx.id, tx.id, dest))
            return {s: sorted(fl, key=lambda f: f.id) for s, fl in out.items()}

        flows_base = flows_for(False)
        flows_off = flows_for(True)
        res_base = run_pf_uplink(flows_base, cfg.n_subframes, rc, pc, table)
        res_off = run_pf_uplink(flows_off, cfg.n_subframes, rc, pc, table)
        base_chunks.append(_throughput_rows(drop, flows_base, res_base))
        off_chunks.append(_throughput_rows(drop, flows_off, res_off))

    empty = np.zeros(0, dtype=THROUGHPUT_SAMPLE_DTYPE)
    baseline = ExperimentReport(
        "throughput",
        (setting,),
        np.concatenate(base_chunks) if base_chunks else empty,
        run_label="baseline",
    )
    offload = ExperimentReport(
        "throughput",
        (setting,),
        np.concatenate(off_chunks) if off_chunks else empty,
        run_label="offload",
    )
    return baseline, offload


def run_experiment(cfg: ExperimentConfig):
    """CLI dispatch: one report for sinr, a (baseline, offload) pair otherwise."""
    if cfg.experiment == "sinr":
        return run_sinr_experiment(cfg)
    return run_throughput_experiment(cfg, cfg.k_d2d)


def percentile(samples, p: float) -> float:
    """Nearest-rank percentile: the ceil(p*n)-th smallest, p=0 -> minimum."""
    arr = np.sort(np.asarray(samples, dtype=float).ravel())
    if arr.size == 0:
        raise ValueError("percentile of an empty sample set")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    rank = max(1, math.ceil(p * arr.size - 1e-12))
    return float(arr[rank - 1])


def fraction_above(samples_db, threshold_db: float) -> float:
    """Fraction of samples strictly above the threshold."""
    arr = np.asarray(samples_db, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("fraction_above of an empty sample set")
    return float(np.count_nonzero(arr > threshold_db) / arr.size)


def discovery_overhead(reserved_subframes: int, period_s: float) -> tuple[float, float]:
    """Capacity fraction consumed by a periodic reservation of 1 ms subframes,
    and the complementary fraction terminals may sleep."""
    if reserved_subframes < 0:
        raise ValueError("reserved_subframes must be >= 0")
    if period_s <= 0:
        raise ValueError("period_s must be positive")
    if reserved_subframes * 1e-3 > period_s:
        raise ValueError("reservation exceeds the period")
    capacity_fraction = reserved_subframes / (period_s * 1000.0)
    return capacity_fraction, 1.0 - capacity_fraction


def sinr_summary(report: ExperimentReport, threshold_db: float = -6.0) -> list[dict]:
    """Per-setting fraction above the threshold, mean, and 5th percentile."""
    rows = []
    for si, setting in enumerate(report.settings):
        vals = report.samples["sinr_db"][report.samples["setting_id"] == si]
        row = {
            "setting_id": si,
            "alpha": setting.alpha,
            "snr_target_db": setting.snr_target_db,
            "label": setting.label,
            "n": int(vals.size),
        }
        if vals.size:
            row["fraction_above"] = fraction_above(vals, threshold_db)
            row["mean_db"] = float(vals.mean())
            row["p5_db"] = percentile(vals, 0.05)
        rows.append(row)
    return rows


def _gain(offload_value: float, baseline_value: float) -> float:
    # A zero baseline happens on runs too short for the PF transient to
    # serve every flow; the gain is then unbounded rather than an error.
    if baseline_value > 0.0:
        return offload_value / baseline_value
    return math.inf if offload_value > 0.0 else math.nan


def throughput_summary(
    baseline: ExperimentReport, offload: ExperimentReport
) -> dict:
    """Mean and 5th-percentile throughput per run, plus offload gains."""
    b = baseline.samples["throughput_bps"]
    o = offload.samples["throughput_bps"]
    out = {
        "n": int(b.size),
        "baseline_mean_bps": float(b.mean()),
        "baseline_p5_bps": percentile(b, 0.05),
        "offload_mean_bps": float(o.mean()),
        "offload_p5_bps": percentile(o, 0.05),
    }
    out["gain_mean"] = _gain(out["offload_mean_bps"], out["baseline_mean_bps"])
    out["gain_p5"] = _gain(out["offload_p5_bps"], out["baseline_p5_bps"])
    return out
