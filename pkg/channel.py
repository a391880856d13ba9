"""
Link models for the three underwater link families (optical UL, acoustic UA,
radio RF): path loss, noise, outage, capacity, minimum transmit power and the
greedy per-node link choice.

Conventions:
    - every loss is an attenuation in dB (>= 0); rx = tx / 10^(loss/10)
    - powers are watts; dB only at the formula boundary
    - Thorp absorption takes the frequency in kHz
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, Mapping, Optional, Sequence

from scipy.special import erfc

from entities import ChannelParams, LinkKind, LinkType, Point3, Scenario, TIE_PRIORITY
from errors import AllInfeasible, Infeasible, OutOfBeam
from utils import db_to_linear, distance, elevation_cosine, linear_to_db

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinkBudget:
    """One link family evaluated between a transmitter and a receiver."""
    link: LinkType
    loss_db: float
    tx_power: float
    rx_power: float
    sinr: float
    capacity: float
    outage: float
    feasible: bool = True  # required power within the link's maximum
    distance: float = 0.0

    @property
    def kind(self) -> LinkKind:
        return self.link.kind

    @property
    def energy_per_bit(self) -> float:
        """Transmit energy per delivered bit (J/bit); infinite when nothing gets through."""
        return self.tx_power / self.capacity if self.capacity > 0 else math.inf


# --- path loss ---

def pl_ul(d: float, cos_theta: float, p: ChannelParams) -> float:
    """
    Optical attenuation of a line-of-sight beam.

    Args:
        d: transmitter-receiver distance (m), > 0
        cos_theta: cosine of the elevation angle between the two ends
        p: channel parameters

    Returns:
        Attenuation in dB, -10*log10(gain)
    """
    if d <= 0:
        raise ValueError(f"d must be > 0, got {d}")
    if cos_theta < math.cos(p.theta0):
        raise OutOfBeam(f"cos_theta={cos_theta:.4f} outside divergence cone")
    gain = (p.eta_T * p.eta_R * p.A_rec * math.exp(-p.c_lambda * d) * cos_theta
            / (2.0 * math.pi * d * d * (1.0 - math.cos(p.theta0))))
    return -10.0 * math.log10(gain)


def thorp_phi_db(f_khz: float) -> float:
    """Thorp absorption in dB/km for a frequency in kHz."""
    f2 = f_khz * f_khz
    return 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003


def pl_ua(d: float, f_khz: float, kappa: float) -> float:
    """Acoustic attenuation: spreading plus absorption."""
    if d <= 0:
        raise ValueError(f"d must be > 0, got {d}")
    return kappa * 10.0 * math.log10(d) + (d / 1000.0) * thorp_phi_db(f_khz)


def ua_noise_components(f_khz: float, s: float, w: float) -> Dict[str, float]:
    """Turbulence, shipping, wind and thermal ambient noise terms in dB."""
    lf = math.log10(f_khz)
    return {
        "turbulence": 17.0 - 30.0 * lf,
        "shipping": 40.0 + 20.0 * (s - 0.5) + 26.0 * lf - 60.0 * math.log10(f_khz + 0.3),
        "wind": 50.0 + 7.5 * math.sqrt(w) + 20.0 * lf - 40.0 * math.log10(f_khz + 0.4),
        "thermal": -15.0 + 20.0 * lf,
    }


def ua_noise_total(f_khz: float, s: float, w: float) -> float:
    """Product of the four ambient noise terms, returned in linear units."""
    return db_to_linear(math.fsum(ua_noise_components(f_khz, s, w).values()))


def pl_rf(d: float, f_hz: float, p: ChannelParams) -> float:
    """Conductive-medium RF attenuation, linear in distance."""
    if d < 0:
        raise ValueError(f"d must be >= 0, got {d}")
    return 8.686 * math.sqrt(math.pi * p.mu * f_hz * p.iota) * d


def path_loss(link: LinkType, src: Point3, dst: Point3, p: ChannelParams) -> float:
    """Attenuation (dB, clamped at 0) of one link family between two points."""
    d = distance(src, dst)
    if d == 0.0:
        return 0.0
    if link.kind == LinkKind.UL:
        loss = pl_ul(d, elevation_cosine(src, dst), p)
    elif link.kind == LinkKind.UA:
        loss = pl_ua(d, link.frequency_hz / 1000.0, p.kappa)
    else:
        loss = pl_rf(d, link.frequency_hz, p)
    return max(loss, 0.0)


# --- outage and capacity ---

def q_function(x: float) -> float:
    """Upper tail of the standard normal distribution."""
    return float(0.5 * erfc(x / math.sqrt(2.0)))


def outage_prob(rx_power: float, p: ChannelParams) -> float:
    """
    Probability that the shadowed received power falls below p_min.

    Shadowing is log-normal with std sigma_db (dB domain).
    """
    if rx_power <= 0.0:
        return 1.0
    arg = (p.p_min_db - linear_to_db(rx_power)) / p.sigma_db
    # 1 - Q(arg) == Q(-arg), which keeps precision in the tail
    return q_function(-arg)


def noise_power(link: LinkType, p: ChannelParams) -> float:
    if link.kind == LinkKind.UA and p.ua_ambient_noise:
        return ua_noise_total(link.frequency_hz / 1000.0, p.s, p.w)
    return p.N0


def capacity(tx_power: float, loss_db: float, I: float, link: LinkType, p: ChannelParams) -> float:
    """Shannon capacity in bits/s with interference I (watts)."""
    rx = tx_power / db_to_linear(loss_db)
    return link.bandwidth_hz * math.log2(1.0 + rx / (noise_power(link, p) + I))


def prop1_power(loss_db: float, link: LinkType, p: ChannelParams) -> float:
    """
    Minimum transmit power whose mean received power equals p_min.

    Raises:
        Infeasible: the power exceeds the link's maximum
    """
    power = db_to_linear(p.p_min_db + loss_db)
    if power > link.max_power_w:
        raise Infeasible(f"{link.kind.value}: needs {power:.3e} W > {link.max_power_w} W")
    return power


def required_power(loss_db: float, p: ChannelParams) -> float:
    """p_min * 10^(loss/10) without the power bound."""
    return p.p_min * db_to_linear(loss_db)


# --- budgets ---

def budget_at_power(link: LinkType, loss_db: float, tx_power: float, I: float,
                    p: ChannelParams, feasible: bool = True, d: float = 0.0) -> LinkBudget:
    if math.isinf(loss_db):
        rx = 0.0
    else:
        rx = tx_power / db_to_linear(loss_db)
    noise = noise_power(link, p)
    sinr = rx / (noise + I)
    return LinkBudget(
        link=link,
        loss_db=loss_db,
        tx_power=tx_power,
        rx_power=rx,
        sinr=sinr,
        capacity=link.bandwidth_hz * math.log2(1.0 + sinr),
        outage=outage_prob(rx, p),
        feasible=feasible,
        distance=d,
    )


def link_budget(link: LinkType, src: Point3, dst: Point3, I: float, p: ChannelParams,
                margin_db: Optional[float] = None) -> LinkBudget:
    """
    Budget of one link family at the minimum power meeting p_min plus the fade margin.

    When that power exceeds the maximum, the link is reported infeasible at
    maximum power; out-of-beam optical links get an infinite loss.
    """
    margin = p.fade_margin_db if margin_db is None else margin_db
    d = distance(src, dst)
    try:
        loss = path_loss(link, src, dst, p)
    except OutOfBeam:
        return budget_at_power(link, math.inf, link.max_power_w, I, p, feasible=False, d=d)
    try:
        tx = prop1_power(loss + margin, link, p)
        feasible = True
    except Infeasible:
        tx = link.max_power_w
        feasible = False
    return budget_at_power(link, loss, tx, I, p, feasible=feasible, d=d)


@dataclass(frozen=True)
class InterferenceState:
    """
    Received-at-USV powers of the transmitters that count as interferers,
    grouped by link family (the J, K, L sets).
    """
    contributions: Mapping[LinkKind, Mapping[int, float]] = field(default_factory=dict)

    @classmethod
    def empty(cls) -> "InterferenceState":
        return cls({kind: {} for kind in LinkKind})

    @classmethod
    def from_assignments(cls, assignments: Mapping[int, LinkBudget],
                         p: ChannelParams) -> "InterferenceState":
        contributions: Dict[LinkKind, Dict[int, float]] = {kind: {} for kind in LinkKind}
        for node_id, b in assignments.items():
            if b.outage <= p.epsilon:
                contributions[b.kind][node_id] = b.rx_power
        return cls(contributions)

    def members(self, kind: LinkKind) -> FrozenSet[int]:
        return frozenset(self.contributions.get(kind, {}))

    def power(self, kind: LinkKind, exclude: Optional[int] = None) -> float:
        """Aggregate interference on one link family, optionally without one node."""
        return math.fsum(rx for j, rx in sorted(self.contributions.get(kind, {}).items())
                         if j != exclude)

    def without(self, node_id: int) -> "InterferenceState":
        return InterferenceState({kind: {j: rx for j, rx in c.items() if j != node_id}
                                  for kind, c in self.contributions.items()})


def link_budgets(src: Point3, dst: Point3, I: InterferenceState, p: ChannelParams,
                 links: Sequence[LinkType]) -> Dict[LinkKind, LinkBudget]:
    """All three link budgets, each with its own family's interference."""
    return {lt.kind: link_budget(lt, src, dst, I.power(lt.kind), p) for lt in links}


def pick_best(budgets: Iterable[LinkBudget]) -> LinkBudget:
    """
    Highest-capacity feasible budget; ties go to lower transmit energy per
    bit, then lower power, then UL > RF > UA.

    Raises:
        AllInfeasible: no feasible budget
    """
    feasible = [b for b in budgets if b.feasible]
    if not feasible:
        raise AllInfeasible("no link closes within its power bound")
    return min(feasible, key=lambda b: (-b.capacity, b.energy_per_bit, b.tx_power,
                                         TIE_PRIORITY[b.kind]))


def best_link(src: Point3, dst: Point3, I: InterferenceState, p: ChannelParams,
              links: Sequence[LinkType]) -> LinkBudget:
    """Greedy link choice maximizing capacity at minimum power."""
    if src == dst:
        raise ValueError("src and dst coincide")
    return pick_best(link_budgets(src, dst, I, p, links).values())


def interference(i: int, assignments: Mapping[int, LinkBudget], p: ChannelParams) -> float:
    """Sum of the other same-family, non-outage transmitters' received powers."""
    kind = assignments[i].kind
    return math.fsum(b.rx_power for j, b in sorted(assignments.items())
                     if j != i and b.kind == kind and b.outage <= p.epsilon)


def with_interference(b: LinkBudget, I: float, p: ChannelParams) -> LinkBudget:
    """Same budget with SINR and capacity recomputed under interference I."""
    sinr = b.rx_power / (noise_power(b.link, p) + I)
    return replace(b, sinr=sinr, capacity=b.link.bandwidth_hz * math.log2(1.0 + sinr))


def assign_direct_links(s: Scenario):
    """
    Greedy direct links of every USN to the USV, with interference.

    The first sweep chooses links without interference; each further sweep
    (channel.interference_sweeps) re-chooses under the previous interference.

    Returns:
        (assignments, state): node id -> LinkBudget with interference applied,
        and the interference state; nodes with no feasible link are absent
    """
    p = s.channel
    state = InterferenceState.empty()
    assignments: Dict[int, LinkBudget] = {}
    for sweep in range(p.interference_sweeps):
        chosen: Dict[int, LinkBudget] = {}
        for u in s.usns:
            try:
                chosen[u.id] = best_link(u.pos, s.usv.pos, state.without(u.id), p, s.link_types)
            except AllInfeasible:
                logger.debug("USN %d: no direct link to the USV", u.id)
        state = InterferenceState.from_assignments(chosen, p)
        assignments = chosen
        logger.debug("interference sweep %d: %d assigned", sweep + 1, len(chosen))

    final = {i: with_interference(b, interference(i, assignments, p), p)
             for i, b in assignments.items()}
    return final, state
