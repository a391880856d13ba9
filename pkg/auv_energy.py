"""
AUV energy and timing model: buoyancy, linear, rotation and electronic
energy terms, data-collection and motion times, and the closed-form velocity.

Depths are passed as |z| (meters, >= 0).
"""
import logging
import math
from typing import Iterable, Tuple

from channel import budget_at_power, path_loss, required_power
from entities import EnergyParams, Point3, Scenario, TIE_PRIORITY, Usv
from errors import DepthExceeded, EnergyExhausted, InfeasibleLink, OutOfBeam, ZeroVelocity
from utils import angle_difference, distance, get_angle_to_point

logger = logging.getLogger(__name__)

VELOCITY_MODES = ("budget", "corrected")

# relative slack for the post-hoc energy check
ENERGY_TOL = 1e-12


def _dive_split(depth_abs: float, p: EnergyParams) -> Tuple[int, float]:
    """Integral part and remainder of |z| / (2 D_max)."""
    ratio = depth_abs / (2.0 * p.D_max)
    whole = math.floor(ratio)
    return whole, ratio - whole


def energy_buoyancy(depth_abs: float, p: EnergyParams) -> float:
    """
    Buoyancy-engine energy to hold a depth.

    Raises:
        DepthExceeded: depth_abs > D_max
    """
    if depth_abs < 0:
        raise ValueError(f"depth_abs must be >= 0, got {depth_abs}")
    if depth_abs > p.D_max:
        raise DepthExceeded(f"depth {depth_abs} m exceeds D_max {p.D_max} m")
    whole, rest = _dive_split(depth_abs, p)
    inner = (whole * p.rho * p.g * p.D_max
             + p.rho * p.g * rest * p.D_max
             + whole * p.P0)
    return 2.0 * p.m_B / (p.eta_B * p.rho) * inner


def energy_linear(d_j0: float, cos_theta: float, depth_abs: float, p: EnergyParams) -> float:
    """Linear-system energy, quartic in the horizontal run d_j0*cos(theta)."""
    if d_j0 < 0:
        raise ValueError(f"d_j0 must be >= 0, got {d_j0}")
    whole, _ = _dive_split(depth_abs, p)
    return (2 * whole + 1) * p.m_L * p.a_L ** 2 * (d_j0 * cos_theta) ** 4 / p.eta_L


def energy_rotation(psi0: float, psi1: float, p: EnergyParams) -> float:
    return p.a_S ** 2 * (psi1 - psi0) ** 4 / (2.0 * p.eta_S)


def energy_electronic(d_j0: float, v: float, p: EnergyParams) -> float:
    """
    Raises:
        ZeroVelocity: v <= 0
    """
    if v <= 0:
        raise ZeroVelocity(f"velocity must be > 0, got {v}")
    return p.a_E * d_j0 / v


def rotation_angles(auv_pos: Point3, usv: Usv) -> Tuple[float, float]:
    """
    Heading before and after the turn at the collection point: outbound
    bearing (USV to AUV) and return bearing (AUV to USV).
    """
    if auv_pos.x == usv.pos.x and auv_pos.y == usv.pos.y:
        return 0.0, 0.0
    outbound = get_angle_to_point(usv.pos.x, usv.pos.y, auv_pos.x, auv_pos.y)
    back = get_angle_to_point(auv_pos.x, auv_pos.y, usv.pos.x, usv.pos.y)
    return outbound, outbound + angle_difference(outbound, back)


def collection_link(s: Scenario, member: Point3, auv_pos: Point3, x2: float,
                    strict: bool = True):
    """
    Member-to-AUV link at transmit power min(x2, link maximum).

    A family closes when its mean received power reaches p_min; the closing
    family with the highest capacity wins (ties UL > RF > UA).
    With strict=False and nothing closing, the best family at maximum power
    is returned instead.

    Raises:
        InfeasibleLink: strict and no family closes
    """
    p = s.channel
    d = distance(member, auv_pos)
    closing, fallback = [], []
    for lt in s.link_types:
        try:
            loss = path_loss(lt, member, auv_pos, p)
        except OutOfBeam:
            continue
        b = budget_at_power(lt, loss, min(max(x2, 0.0), lt.max_power_w), 0.0, p, d=d)
        if b.rx_power > 0.0 and b.rx_power >= p.p_min:
            closing.append(b)
        fallback.append(budget_at_power(lt, loss, lt.max_power_w, 0.0, p, d=d))

    def rank(b):
        return (-b.capacity, TIE_PRIORITY[b.kind])

    if closing:
        return min(closing, key=rank)
    if strict or not fallback:
        raise InfeasibleLink(f"no link closes at {x2:.3e} W over {d:.1f} m")
    return min(fallback, key=rank)


def time_collect(s: Scenario, members: Iterable[int], auv_pos: Point3, x2: float,
                 strict: bool = True) -> Tuple[float, float]:
    """
    Time for the AUV to collect every member's packet, and the AUV-side
    reception energy.

    Each member contributes packet/capacity + distance/speed over its best
    closing link at power x2.

    Returns:
        (t_R seconds, e_R joules)

    Raises:
        InfeasibleLink: strict and some member closes no link
    """
    t_total = 0.0
    bits = 0.0
    for i in members:
        u = s.usn(i)
        b = collection_link(s, u.pos, auv_pos, x2, strict=strict)
        t_total += u.packet_size / b.capacity + b.distance / b.link.speed_mps
        bits += u.packet_size
    return t_total, s.energy.e_rx_per_bit * bits


def time_motion(auv_pos: Point3, usv: Usv, v: float) -> float:
    """
    Raises:
        ZeroVelocity: v <= 0
    """
    if v <= 0:
        raise ZeroVelocity(f"velocity must be > 0, got {v}")
    return distance(auv_pos, usv.pos) / v


def optimal_velocity(d_j0: float, fixed_energy: float, p: EnergyParams,
                     v_max: float, E_max: float, mode: str = "budget") -> float:
    """
    Velocity of an AUV under its energy budget.

    "budget" returns min(a_E d / (E_max - fixed), v_max).
    "corrected" returns v_max whenever the electronic energy at v_max fits
    the remaining budget, since that energy only falls as v grows.

    Raises:
        EnergyExhausted: fixed_energy >= E_max, or the chosen velocity
            still overruns the budget (exc.velocity carries it)
    """
    if mode not in VELOCITY_MODES:
        raise ValueError(f"unknown velocity mode '{mode}'")
    remaining = E_max - fixed_energy
    if remaining <= 0:
        raise EnergyExhausted(f"fixed energy {fixed_energy:.4e} J >= E_max {E_max:.4e} J")
    if d_j0 <= 0:
        return v_max

    v_bound = p.a_E * d_j0 / remaining
    if mode == "budget":
        v = min(v_bound, v_max)
    else:
        v = v_max

    total = fixed_energy + energy_electronic(d_j0, v, p)
    if total > E_max * (1.0 + ENERGY_TOL):
        raise EnergyExhausted(
            f"total energy {total:.4e} J exceeds E_max {E_max:.4e} J at v={v:.4g} m/s",
            velocity=v)
    return v


def required_link_power(s: Scenario, member: Point3, auv_pos: Point3) -> float:
    """
    Smallest transmit power that brings the member's mean received power at
    the AUV to p_min, over the families that can close within their maximum
    (over all families when none can).
    """
    needs = []
    for lt in s.link_types:
        try:
            loss = path_loss(lt, member, auv_pos, s.channel)
        except OutOfBeam:
            continue
        needs.append((required_power(loss, s.channel), lt.max_power_w))
    if not needs:
        return math.inf
    within = [need for need, cap in needs if need <= cap]
    return min(within) if within else min(need for need, _ in needs)
