"""
AUV deployment for the isolated nodes: clustering, suspension positions and
per-AUV time and energy plans.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

import config
from auv_energy import (energy_buoyancy, energy_electronic, energy_linear, energy_rotation,
                        optimal_velocity, required_link_power, rotation_angles, time_collect,
                        time_motion)
from clustering import akmc, refine_position
from entities import Point3, Scenario
from errors import EnergyExhausted, InfeasibleLink
from utils import distance, elevation_cosine, make_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Cluster:
    centroid: Point3  # AUV suspension position
    members: Tuple[int, ...]  # IUSN ids, ascending


@dataclass(frozen=True)
class AuvPlan:
    auv_id: int
    cluster: Cluster
    velocity: float
    t_R: float
    t_M: float
    e_R: float
    e_B: float
    e_L: float
    e_S: float
    e_E: float
    total_energy: float
    d_j0: float
    psi0: float = 0.0
    psi1: float = 0.0
    feasible: bool = True
    issue: str = ""

    @property
    def t(self) -> float:
        """Collection plus return time."""
        return self.t_R + self.t_M

    @property
    def position(self) -> Point3:
        return self.cluster.centroid


@dataclass(frozen=True)
class Deployment:
    plans: Tuple[AuvPlan, ...]
    x1: int  # requested AUV count
    x2: float  # IUSN transmit power (W)
    velocity_mode: str

    @property
    def n_auvs(self) -> int:
        return len(self.plans)

    @property
    def makespan(self) -> float:
        return max((p.t for p in self.plans), default=0.0)

    @property
    def total_energy(self) -> float:
        return math.fsum(p.total_energy for p in self.plans)

    @property
    def feasible(self) -> bool:
        return all(p.feasible for p in self.plans)


def cluster_iusns(s: Scenario, c_ids: Sequence[int], x1: int,
                  n_max: Optional[int] = None,
                  refine: bool = config.REFINE_POSITIONS) -> List[Cluster]:
    """
    Capacity-bounded clusters of the isolated nodes with AUV positions.

    Stage one clusters in (x, y); stage two starts from each centroid and
    moves it toward the point minimizing member distances plus the return leg.
    The AUV depth is the members' mean depth.
    """
    if not c_ids:
        raise ValueError("no isolated nodes to deploy for")
    ids = sorted(c_ids)
    pts = np.array([[s.usn(i).pos.x, s.usn(i).pos.y, s.usn(i).pos.z] for i in ids])
    capacity = s.n_max if n_max is None else n_max
    result = akmc(pts, x1, capacity, make_rng(s.seed, "akmc", x1))

    usv_xy = (s.usv.pos.x, s.usv.pos.y)
    clusters = []
    for c in range(result.k):
        idx = result.members(c)
        if len(idx) == 0:
            continue
        xy = result.centroids[c]
        if refine:
            xy = refine_position(pts[idx, :2], usv_xy, xy)
        z = float(np.mean(pts[idx, 2]))
        clusters.append(Cluster(Point3(float(xy[0]), float(xy[1]), z),
                                tuple(ids[j] for j in idx)))
    clusters.sort(key=lambda cl: cl.members[0])
    return clusters


def plan_auv(s: Scenario, auv_id: int, cluster: Cluster, x2: float,
             velocity_mode: str = config.VELOCITY_MODE) -> AuvPlan:
    """
    Time and energy of one AUV serving one cluster.

    Infeasible plans are returned with feasible=False and the reason in
    `issue`: a member that closes no link at x2 is timed over its best link
    at maximum power; an overrun energy budget keeps the velocity the
    velocity law produced (v_max when none).
    """
    en, auv = s.energy, s.auv_template
    pos = cluster.centroid
    issues = []

    try:
        t_R, e_R = time_collect(s, cluster.members, pos, x2)
    except InfeasibleLink as exc:
        issues.append(f"link: {exc}")
        t_R, e_R = time_collect(s, cluster.members, pos, x2, strict=False)

    d_j0 = distance(pos, s.usv.pos)
    depth = abs(pos.z)
    e_B = energy_buoyancy(depth, en)
    e_L = energy_linear(d_j0, elevation_cosine(pos, s.usv.pos), depth, en)
    psi0, psi1 = rotation_angles(pos, s.usv)
    e_S = energy_rotation(psi0, psi1, en)
    fixed = e_R + e_B + e_L + e_S

    try:
        v = optimal_velocity(d_j0, fixed, en, auv.v_max, auv.E_max, velocity_mode)
    except EnergyExhausted as exc:
        issues.append(f"energy: {exc}")
        v = exc.velocity if exc.velocity is not None else auv.v_max

    e_E = energy_electronic(d_j0, v, en)
    t_M = time_motion(pos, s.usv, v)
    total = e_R + e_B + e_L + e_S + e_E
    if total > auv.E_max * (1.0 + 1e-12) and not any(i.startswith("energy") for i in issues):
        issues.append(f"energy: total {total:.4e} J exceeds E_max")

    return AuvPlan(
        auv_id=auv_id, cluster=cluster, velocity=v,
        t_R=t_R, t_M=t_M,
        e_R=e_R, e_B=e_B, e_L=e_L, e_S=e_S, e_E=e_E, total_energy=total,
        d_j0=d_j0, psi0=psi0, psi1=psi1,
        feasible=not issues, issue="; ".join(issues),
    )


def deploy(s: Scenario, c_ids: Sequence[int], x1: int, x2: float,
           velocity_mode: str = config.VELOCITY_MODE,
           clusters: Optional[Sequence[Cluster]] = None,
           n_max: Optional[int] = None,
           refine: bool = config.REFINE_POSITIONS) -> Deployment:
    """
    Cluster the isolated nodes and plan every AUV.

    Args:
        s: scenario
        c_ids: isolated node ids
        x1: starting AUV count (grows when a cluster exceeds capacity)
        x2: IUSN transmit power (W)
        velocity_mode: "budget" or "corrected"
        clusters: precomputed clusters for this x1
        n_max: capacity override (defaults to the scenario's)

    Returns:
        Deployment with one plan per cluster; infeasible plans are kept
    """
    if x1 < 1:
        raise ValueError(f"x1 must be >= 1, got {x1}")
    if clusters is None:
        clusters = cluster_iusns(s, c_ids, x1, n_max=n_max, refine=refine)
    plans = tuple(plan_auv(s, j, cl, x2, velocity_mode) for j, cl in enumerate(clusters))
    bad = [p.auv_id for p in plans if not p.feasible]
    if bad:
        logger.debug("deploy x1=%d x2=%.3e: infeasible AUVs %s", x1, x2, bad)
    return Deployment(plans=plans, x1=x1, x2=x2, velocity_mode=velocity_mode)


def member_power_violation(s: Scenario, deployment: Deployment) -> float:
    """
    Sum over members of the power shortfall below their cheapest closing
    link to their AUV.
    """
    shortfall = []
    for plan in deployment.plans:
        for i in plan.cluster.members:
            need = required_link_power(s, s.usn(i).pos, plan.position)
            shortfall.append(max(0.0, need - deployment.x2))
    return math.fsum(shortfall)


def energy_violation(s: Scenario, deployment: Deployment) -> float:
    return math.fsum(max(0.0, p.total_energy - s.auv_template.E_max) for p in deployment.plans)
