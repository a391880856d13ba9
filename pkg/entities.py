"""
Domain records for the underwater network: nodes, link types, parameter tables
and the scenario that bundles them.

Scenario values are immutable after construction and can be shared freely.
"""
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, Optional, Tuple

import numpy as np

import config
from utils import dbm_to_watts, linear_to_db


class LinkKind(str, Enum):
    """The three underwater communication link families."""
    UL = "UL"  # optical
    UA = "UA"  # acoustic
    RF = "RF"  # radio


# Order of the per-link entries in RL state vectors
STATE_ORDER: Tuple[LinkKind, ...] = (LinkKind.UL, LinkKind.UA, LinkKind.RF)

# Tie-break order for greedy link selection (lower wins)
TIE_PRIORITY: Dict[LinkKind, int] = {LinkKind.UL: 0, LinkKind.RF: 1, LinkKind.UA: 2}


@dataclass(frozen=True)
class Point3:
    """Position in meters; z <= 0 underwater, z = 0 at the sea surface."""
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def horizontal(self) -> Tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class UsnNode:
    """Static underwater sensor node."""
    id: int
    pos: Point3
    packet_size: float = config.PACKET_SIZE_BITS


@dataclass(frozen=True)
class AuvNode:
    """AUV defaults; positions are assigned at deployment."""
    id: int = 0
    pos: Point3 = Point3(0.0, 0.0, 0.0)
    v_max: float = config.V_MAX
    E_max: float = config.E_MAX


@dataclass(frozen=True)
class Usv:
    """Surface gateway; never moves."""
    pos: Point3


@dataclass(frozen=True)
class LinkType:
    kind: LinkKind
    frequency_hz: float
    max_power_w: float
    speed_mps: float
    bandwidth_hz: float


def default_link_types() -> Tuple[LinkType, ...]:
    """UL, UA and RF records with the default frequencies, powers and speeds."""
    return (
        LinkType(LinkKind.UL, config.UL_FREQUENCY_HZ, config.UL_MAX_POWER_W,
                 config.UL_SPEED_MPS, config.UL_BANDWIDTH_HZ),
        LinkType(LinkKind.UA, config.UA_FREQUENCY_HZ, config.UA_MAX_POWER_W,
                 config.UA_SPEED_MPS, config.UA_BANDWIDTH_HZ),
        LinkType(LinkKind.RF, config.RF_FREQUENCY_HZ, config.RF_MAX_POWER_W,
                 config.RF_SPEED_MPS, config.RF_BANDWIDTH_HZ),
    )


@dataclass(frozen=True)
class ChannelParams:
    """
    Channel model parameters.

    Powers (N0, p_min) are in watts; the dB views are properties.
    """
    eta_T: float = config.ETA_T
    eta_R: float = config.ETA_R
    c_lambda: float = config.C_LAMBDA
    A_rec: float = config.A_REC
    theta0: float = config.THETA0
    kappa: float = config.KAPPA
    s: float = config.SHIPPING
    w: float = config.WIND_SPEED
    mu: float = config.MU
    iota: float = config.IOTA
    N0: float = dbm_to_watts(config.N0_DBM)
    sigma_db: float = config.SIGMA_DB
    p_min: float = dbm_to_watts(config.P_MIN_DBM)
    epsilon: float = config.EPSILON
    gamma: float = config.GAMMA
    fade_margin_db: float = config.FADE_MARGIN_DB
    ua_ambient_noise: bool = config.UA_AMBIENT_NOISE
    interference_sweeps: int = config.INTERFERENCE_SWEEPS

    @property
    def p_min_db(self) -> float:
        """Received-power threshold in dBW."""
        return linear_to_db(self.p_min)


@dataclass(frozen=True)
class EnergyParams:
    rho: float = config.RHO
    eta_B: float = config.ETA_B
    eta_L: float = config.ETA_L
    eta_S: float = config.ETA_S
    m_B: float = config.M_B
    m_L: float = config.M_L
    g: float = config.GRAVITY
    D_max: float = config.D_MAX
    P0: float = config.P0
    a_L: float = config.A_L
    a_S: float = config.A_S
    a_E: float = config.A_E
    psi0: float = config.PSI0
    psi1: float = config.PSI1
    e_rx_per_bit: float = config.E_RX_PER_BIT


@dataclass(frozen=True)
class Box:
    """Deployment area: x in [0, width], y in [0, length], z in [-depth, 0]."""
    width: float = config.AREA_WIDTH
    length: float = config.AREA_LENGTH
    depth: float = config.AREA_DEPTH


@dataclass(frozen=True)
class ScenarioConfig:
    """Inputs for scenario generation."""
    n_usns: int = config.NUM_USNS
    box: Box = field(default_factory=Box)
    usv_xy: Optional[Tuple[float, float]] = None  # None = surface center
    packet_size: float = config.PACKET_SIZE_BITS
    n_max: int = config.N_MAX
    channel: ChannelParams = field(default_factory=ChannelParams)
    energy: EnergyParams = field(default_factory=EnergyParams)
    auv: AuvNode = field(default_factory=AuvNode)


@dataclass(frozen=True)
class Scenario:
    usns: Tuple[UsnNode, ...]
    auv_template: AuvNode
    usv: Usv
    link_types: Tuple[LinkType, ...]
    channel: ChannelParams
    energy: EnergyParams
    seed: int
    n_max: int
    box: Box = field(default_factory=Box)

    @cached_property
    def _usn_index(self) -> Dict[int, UsnNode]:
        return {u.id: u for u in self.usns}

    def usn(self, node_id: int) -> UsnNode:
        return self._usn_index[node_id]

    def link(self, kind: LinkKind) -> LinkType:
        for lt in self.link_types:
            if lt.kind == kind:
                return lt
        raise KeyError(kind)

    @property
    def node_ids(self) -> Tuple[int, ...]:
        return tuple(u.id for u in self.usns)

    @property
    def max_link_power(self) -> float:
        return max(lt.max_power_w for lt in self.link_types)
