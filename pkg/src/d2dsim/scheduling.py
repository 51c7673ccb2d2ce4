"""D2D coordination modes and the subframe-level proportional-fair uplink
scheduler with direct-link offload.

Coordination decides which D2D transmitters are simultaneously on the air:
all of them (uncoordinated), one per sector in round-robin (orthogonal TDM),
or k per sector rotating through the transmitter list so everyone gets equal
airtime (spatial reuse).

The PF scheduler grants one flow per sector per subframe for the whole band.
Grants at subframe t are chosen from SINRs computed against the transmitters
granted at t-1 (noise-only at t=0); the rates actually served use the grants
concurrently active at t. That one-subframe lag avoids a grant/interference
fixed point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .channel import CouplingTable, UE_NODE, ue_endpoint
from .radio import (
    PowerControlConfig,
    RadioConfig,
    open_loop_tx_power,
    rate_from_sinr,
    receiver_noise_dbm,
)

SUBFRAME_S = 1e-3


@dataclass(frozen=True)
class CoordinationMode:
    kind: str  # "uncoordinated" | "tdm" | "reuse"
    k: int = 1

    def __post_init__(self):
        if self.kind not in ("uncoordinated", "tdm", "reuse"):
            raise ValueError(f"unknown coordination kind {self.kind!r}")
        if self.k < 1:
            raise ValueError(f"reuse factor must be >= 1, got {self.k}")


UNCOORDINATED = CoordinationMode("uncoordinated")
ORTHOGONAL_TDM = CoordinationMode("tdm")


def spatial_reuse(k: int) -> CoordinationMode:
    return CoordinationMode("reuse", k)


def active_slot_indices(mode: CoordinationMode, n_tx: int, subframe: int) -> tuple[int, ...]:
    """Positions (within a sector's transmitter list) on the air at a subframe."""
    if n_tx <= 0:
        return ()
    if mode.kind == "uncoordinated":
        return tuple(range(n_tx))
    if mode.kind == "tdm":
        return (subframe % n_tx,)
    k = min(mode.k, n_tx)
    start = (subframe * k) % n_tx
    return tuple(sorted((start + j) % n_tx for j in range(k)))


def cycle_length(mode: CoordinationMode, n_tx: int) -> int:
    """Subframes after which the activation pattern repeats."""
    if n_tx <= 0 or mode.kind == "uncoordinated":
        return 1
    if mode.kind == "tdm":
        return n_tx
    k = min(mode.k, n_tx)
    return n_tx // math.gcd(n_tx, k)


def positions_per_tx(mode: CoordinationMode, n_tx: int) -> int:
    """How many subframes of one cycle each transmitter is active in."""
    if n_tx <= 0:
        return 0
    if mode.kind in ("uncoordinated", "tdm"):
        return 1
    k = min(mode.k, n_tx)
    return k // math.gcd(n_tx, k)


@dataclass(frozen=True)
class SlotAssignment:
    subframe_index: int
    active: dict[int, tuple[int, ...]]  # sector -> transmitting UE ids


def assign_d2d_slots(
    mode: CoordinationMode,
    d2d_txs_by_sector: Mapping[int, Sequence[int]],
    n_subframes: int,
) -> list[SlotAssignment]:
    if n_subframes < 1:
        raise ValueError(f"n_subframes must be >= 1, got {n_subframes}")
    out = []
    for t in range(n_subframes):
        active = {}
        for sector, txs in d2d_txs_by_sector.items():
            idx = active_slot_indices(mode, len(txs), t)
            active[sector] = tuple(txs[i] for i in idx)
        out.append(SlotAssignment(t, active))
    return out


@dataclass
class Flow:
    """One scheduled traffic source: a terminal transmitting either to its
    serving sector or directly to its peer."""

    id: int
    tx_ue: int
    destination: tuple  # ("sector", index) or ("ue", peer id)
    avg_rate_bps: float = 0.0

    @property
    def role(self) -> str:
        return "d2d" if self.destination[0] == UE_NODE else "cellular"


def pf_select(flows: Sequence[Flow], inst_rate_bps: Mapping[int, float]) -> int:
    """Flow id maximizing inst/avg rate; ties go to the lowest id."""
    if not flows:
        raise ValueError("pf_select needs at least one flow")
    best_id = None
    best_metric = -math.inf
    for f in sorted(flows, key=lambda f: f.id):
        if f.avg_rate_bps <= 0:
            raise ValueError(f"flow {f.id} has non-positive average rate")
        metric = inst_rate_bps[f.id] / f.avg_rate_bps
        if metric > best_metric:
            best_metric = metric
            best_id = f.id
    return best_id


def pf_update(flow: Flow, served_rate_bps: float, t_c: int) -> Flow:
    """Exponential moving average step; served rate is 0 when not scheduled."""
    if t_c < 1:
        raise ValueError(f"t_c must be >= 1, got {t_c}")
    flow.avg_rate_bps = (1.0 - 1.0 / t_c) * flow.avg_rate_bps + served_rate_bps / t_c
    return flow


@dataclass(frozen=True)
class PfResult:
    throughput_bps: dict[int, float]
    granted_subframes: dict[int, int]


def run_pf_uplink(
    sector_flows: Mapping[int, Sequence[Flow]],
    n_subframes: int,
    rc: RadioConfig,
    pc: PowerControlConfig,
    table: CouplingTable,
    t_c: int = 100,
) -> PfResult:
    """Run the PF loop and return per-flow throughput over n_subframes.

    Each flow's transmit power is fixed up front by open-loop power control
    against its own link coupling, with the noise term taken at its own
    receiver (terminal or base). PF averages start at the flow's
    no-interference rate. Sectors with no flows are skipped.
    """
    if n_subframes < 1:
        raise ValueError(f"n_subframes must be >= 1, got {n_subframes}")
    sectors = sorted(s for s in sector_flows if sector_flows[s])
    flows: list[Flow] = [f for s in sectors for f in sector_flows[s]]
    n_flows = len(flows)
    if n_flows == 0:
        return PfResult({}, {})
    pos_of = {f.id: i for i, f in enumerate(flows)}
    pos_by_sector = [
        np.array([pos_of[f.id] for f in sector_flows[s]], dtype=int) for s in sectors
    ]
    sector_of_pos = np.zeros(n_flows, dtype=int)
    for si, positions in enumerate(pos_by_sector):
        sector_of_pos[positions] = si

    own_loss = np.array(
        [table.loss_db(ue_endpoint(f.tx_ue), f.destination) for f in flows]
    )
    noise_dbm = np.array([receiver_noise_dbm(rc, f.destination) for f in flows])
    p_dbm = np.array(
        [
            open_loop_tx_power(replace(pc, noise_dbm=noise_dbm[i]), own_loss[i])
            for i, f in enumerate(flows)
        ]
    )
    p_lin = 10.0 ** (p_dbm / 10.0)
    noise_lin = 10.0 ** (noise_dbm / 10.0)
    signal_lin = p_lin * 10.0 ** (-own_loss / 10.0)
    # coupling_lin[g, f]: power flow g's transmitter lands at flow f's receiver.
    coupling_lin = np.empty((n_flows, n_flows))
    for g, src in enumerate(flows):
        src_ep = ue_endpoint(src.tx_ue)
        for f, dst in enumerate(flows):
            coupling_lin[g, f] = p_lin[g] * 10.0 ** (-table.loss_db(src_ep, dst.destination) / 10.0)

    for i, f in enumerate(flows):
        snr_db = 10.0 * math.log10(signal_lin[i] / noise_lin[i])
        f.avg_rate_bps = max(rate_from_sinr(snr_db, rc.bandwidth_hz, rc), 1.0)

    bits = np.zeros(n_flows)
    grant_count = np.zeros(n_flows, dtype=int)
    prev_grants: list[int] = []
    all_pos = np.arange(n_flows)

    for t in range(n_subframes):
        # Grants use the previous subframe's interference snapshot
        # (noise-only at t=0); service uses the grants concurrent at t.
        if prev_grants:
            total = coupling_lin[prev_grants].sum(axis=0)
            own = coupling_lin[np.asarray(prev_grants)[sector_of_pos], all_pos]
            interference = np.maximum(total - own, 0.0)
        else:
            interference = np.zeros(n_flows)
        est_sinr_db = 10.0 * np.log10(signal_lin / (noise_lin + interference))
        inst = rate_from_sinr(est_sinr_db, rc.bandwidth_hz, rc)

        grants = []
        for si, s in enumerate(sectors):
            rates = {flows[p].id: float(inst[p]) for p in pos_by_sector[si]}
            grants.append(pos_of[pf_select(sector_flows[s], rates)])

        served = np.zeros(n_flows)
        grant_total = coupling_lin[grants].sum(axis=0)
        for p in grants:
            other = max(grant_total[p] - coupling_lin[p, p], 0.0)
            sinr_db = 10.0 * math.log10(signal_lin[p] / (noise_lin[p] + other))
            served[p] = rate_from_sinr(sinr_db, rc.bandwidth_hz, rc)
            bits[p] += served[p] * SUBFRAME_S
            grant_count[p] += 1
        for i, f in enumerate(flows):
            pf_update(f, float(served[i]), t_c)
        prev_grants = grants

    duration_s = n_subframes * SUBFRAME_S
    return PfResult(
        throughput_bps={f.id: float(bits[i] / duration_s) for i, f in enumerate(flows)},
        granted_subframes={f.id: int(grant_count[i]) for i, f in enumerate(flows)},
    )
