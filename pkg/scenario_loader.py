"""
Scenario generation, validation and JSON scenario files
"""
import json
import logging
import math
from dataclasses import asdict, fields, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import config
from entities import (AuvNode, Box, ChannelParams, EnergyParams, LinkKind,
                      Point3, Scenario, ScenarioConfig, UsnNode, Usv, default_link_types)
from errors import FormatVersionMismatch, InvalidConfig
from utils import dbm_to_watts, make_rng

logger = logging.getLogger(__name__)

EXPECTED_SPEEDS = {LinkKind.UA: 1500.0, LinkKind.UL: 2.25e8, LinkKind.RF: 2.25e8}


def generate_scenario(cfg: ScenarioConfig, seed: int) -> Scenario:
    """
    Build a random scenario: USNs uniform in the box, USV at the surface.

    Args:
        cfg: generation settings and parameter tables
        seed: run seed; the same (cfg, seed) always yields the same scenario

    Returns:
        Scenario
    """
    box = cfg.box
    if box.width <= 0 or box.length <= 0 or box.depth <= 0:
        raise InvalidConfig(f"box dimensions must be positive, got {box}")
    if cfg.n_usns < 1:
        raise InvalidConfig(f"n_usns must be >= 1, got {cfg.n_usns}")
    if seed < 0:
        raise InvalidConfig(f"seed must be non-negative, got {seed}")

    rng = make_rng(seed, "scenario")
    xs = rng.uniform(0.0, box.width, cfg.n_usns)
    ys = rng.uniform(0.0, box.length, cfg.n_usns)
    # z in [-depth, 0)
    zs = -box.depth * (1.0 - rng.random(cfg.n_usns))

    usns = tuple(
        UsnNode(id=i, pos=Point3(float(xs[i]), float(ys[i]), float(zs[i])),
                packet_size=cfg.packet_size)
        for i in range(cfg.n_usns)
    )
    scenario = Scenario(
        usns=usns,
        auv_template=cfg.auv,
        usv=Usv(Point3(*_usv_xy(cfg), 0.0)),
        link_types=default_link_types(),
        channel=cfg.channel,
        energy=cfg.energy,
        seed=seed,
        n_max=cfg.n_max,
        box=box,
    )
    logger.info("generated scenario: %d USNs in %.0fx%.0fx%.0f m, seed %d",
                cfg.n_usns, box.width, box.length, box.depth, seed)
    return scenario


def build_scenario(positions: Sequence[Tuple[float, float, float]],
                   cfg: Optional[ScenarioConfig] = None,
                   seed: int = 0,
                   **overrides: Any) -> Scenario:
    """
    Scenario from explicit USN positions (ids follow the sequence order).

    Keyword overrides replace Scenario fields (usv, channel, link_types, n_max, ...).
    """
    cfg = cfg or ScenarioConfig()
    usns = tuple(UsnNode(id=i, pos=Point3(float(x), float(y), float(z)),
                         packet_size=cfg.packet_size)
                 for i, (x, y, z) in enumerate(positions))
    scenario = Scenario(
        usns=usns,
        auv_template=cfg.auv,
        usv=Usv(Point3(*_usv_xy(cfg), 0.0)),
        link_types=default_link_types(),
        channel=cfg.channel,
        energy=cfg.energy,
        seed=seed,
        n_max=cfg.n_max,
        box=cfg.box,
    )
    return replace(scenario, **overrides) if overrides else scenario


def _usv_xy(cfg: ScenarioConfig) -> Tuple[float, float]:
    if cfg.usv_xy is not None:
        return (float(cfg.usv_xy[0]), float(cfg.usv_xy[1]))
    return (cfg.box.width / 2.0, cfg.box.length / 2.0)


def validate_scenario(s: Scenario) -> List[str]:
    """
    Check every type invariant.

    Returns:
        List of violations, each "field: bound"; empty when the scenario is valid
    """
    v: List[str] = []

    def check(ok: bool, name: str, bound: str):
        if not ok:
            v.append(f"{name}: {bound}")

    ch, en, box = s.channel, s.energy, s.box

    check(len(s.usns) >= 1, "usns", "at least one USN required")
    ids = [u.id for u in s.usns]
    check(len(set(ids)) == len(ids), "usns.id", "ids must be unique")
    for u in s.usns:
        p = u.pos
        name = f"usns[{u.id}]"
        check(math.isfinite(p.x) and math.isfinite(p.y), f"{name}.pos", "x, y must be finite")
        check(-en.D_max <= p.z <= 0.0, f"{name}.pos.z", f"must be in [-{en.D_max}, 0]")
        check(0.0 <= p.x <= box.width and 0.0 <= p.y <= box.length and p.z >= -box.depth,
              f"{name}.pos", "must lie within the configured box")
        check(u.packet_size > 0, f"{name}.packet_size", "must be > 0")

    check(s.usv.pos.z == 0.0, "usv.pos.z", "must be exactly 0")
    check(s.auv_template.v_max > 0, "auv.v_max", "must be > 0")
    check(s.auv_template.E_max > 0, "auv.E_max", "must be > 0")

    kinds = sorted(lt.kind.value for lt in s.link_types)
    check(kinds == ["RF", "UA", "UL"], "link_types", "exactly one UL, UA and RF record")
    for lt in s.link_types:
        name = f"links.{lt.kind.value}"
        check(lt.max_power_w > 0, f"{name}.max_power_w", "must be > 0")
        check(lt.frequency_hz > 0, f"{name}.frequency_hz", "must be > 0")
        check(lt.bandwidth_hz > 0, f"{name}.bandwidth_hz", "must be > 0")
        check(lt.speed_mps == EXPECTED_SPEEDS[lt.kind], f"{name}.speed_mps",
              f"must equal {EXPECTED_SPEEDS[lt.kind]}")

    check(1.0 <= ch.kappa <= 2.0, "channel.kappa", "κ ∈ [1,2]")
    check(0.0 <= ch.s <= 1.0, "channel.s", "s ∈ [0,1]")
    check(0.0 < ch.epsilon < 1.0, "channel.epsilon", "ε ∈ (0,1)")
    check(0.0 < ch.eta_T <= 1.0, "channel.eta_T", "∈ (0,1]")
    check(0.0 < ch.eta_R <= 1.0, "channel.eta_R", "∈ (0,1]")
    check(0.0 < ch.theta0 < math.pi / 2, "channel.theta0", "∈ (0, pi/2)")
    check(ch.w >= 0.0, "channel.w", "must be >= 0")
    check(ch.fade_margin_db >= 0.0, "channel.fade_margin_db", "must be >= 0")
    check(ch.interference_sweeps >= 1, "channel.interference_sweeps", "must be >= 1")
    for name in ("c_lambda", "A_rec", "mu", "iota", "N0", "sigma_db", "p_min", "gamma"):
        check(getattr(ch, name) > 0, f"channel.{name}", "must be > 0")

    for name in ("eta_B", "eta_L", "eta_S"):
        check(0.0 < getattr(en, name) <= 1.0, f"energy.{name}", "∈ (0,1]")
    for name in ("rho", "m_B", "m_L", "g", "D_max", "P0", "a_L", "a_S", "a_E"):
        check(getattr(en, name) > 0, f"energy.{name}", "must be > 0")
    check(en.e_rx_per_bit >= 0, "energy.e_rx_per_bit", "must be >= 0")

    check(s.n_max >= 1, "run.n_max", "must be >= 1")
    check(s.seed >= 0, "run.seed", "must be >= 0")
    return v


# --- JSON scenario files ---

def scenario_to_dict(s: Scenario) -> Dict[str, Any]:
    return {
        "format_version": config.FORMAT_VERSION,
        "nodes": {
            "box": asdict(s.box),
            "usv": {"x": s.usv.pos.x, "y": s.usv.pos.y},
            "auv": {"v_max": s.auv_template.v_max, "E_max": s.auv_template.E_max},
            "usns": [{"id": u.id, "x": u.pos.x, "y": u.pos.y, "z": u.pos.z,
                      "packet_size": u.packet_size} for u in s.usns],
        },
        "links": {lt.kind.value: {"frequency_hz": lt.frequency_hz,
                                  "max_power_w": lt.max_power_w,
                                  "speed_mps": lt.speed_mps,
                                  "bandwidth_hz": lt.bandwidth_hz}
                  for lt in s.link_types},
        "channel": asdict(s.channel),
        "energy": asdict(s.energy),
        "run": {"seed": s.seed, "n_max": s.n_max},
    }


def take_section(section: Dict[str, Any], name: str, allowed: Sequence[str]) -> Dict[str, Any]:
    if not isinstance(section, dict):
        raise InvalidConfig(f"section '{name}' must be an object")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise InvalidConfig(f"unknown keys in '{name}': {unknown}")
    return section


def _dataclass_from(cls, data: Dict[str, Any], name: str):
    names = [f.name for f in fields(cls)]
    return cls(**take_section(data, name, names))


def channel_from_dict(data: Dict[str, Any]) -> ChannelParams:
    data = dict(data)
    # dBm spellings are accepted on input only
    for key, target in (("N0_dbm", "N0"), ("p_min_dbm", "p_min")):
        if key in data:
            if target in data:
                raise InvalidConfig(f"channel: give either '{key}' or '{target}', not both")
            data[target] = dbm_to_watts(data.pop(key))
    return _dataclass_from(ChannelParams, data, "channel")


def scenario_from_dict(data: Dict[str, Any]) -> Scenario:
    take_section(data, "scenario", ["format_version", "nodes", "links", "channel", "energy", "run"])
    version = data.get("format_version", config.FORMAT_VERSION)
    if version != config.FORMAT_VERSION:
        raise FormatVersionMismatch(
            f"scenario format_version {version}, expected {config.FORMAT_VERSION}")
    for section in ("nodes", "links", "channel", "energy", "run"):
        if section not in data:
            raise InvalidConfig(f"missing section '{section}'")

    nodes = take_section(data["nodes"], "nodes", ["box", "usv", "auv", "usns"])
    box = _dataclass_from(Box, nodes.get("box", {}), "nodes.box")
    usv = take_section(nodes.get("usv", {}), "nodes.usv", ["x", "y"])
    auv = take_section(nodes.get("auv", {}), "nodes.auv", ["v_max", "E_max"])
    usns = []
    for k, u in enumerate(nodes.get("usns", [])):
        u = take_section(u, f"nodes.usns[{k}]", ["id", "x", "y", "z", "packet_size"])
        usns.append(UsnNode(id=int(u["id"]), pos=Point3(u["x"], u["y"], u["z"]),
                            packet_size=u.get("packet_size", config.PACKET_SIZE_BITS)))

    defaults = {lt.kind.value: lt for lt in default_link_types()}
    links_section = take_section(data["links"], "links", list(defaults))
    link_types = []
    for kind, base in defaults.items():
        spec = take_section(links_section.get(kind, {}), f"links.{kind}",
                     ["frequency_hz", "max_power_w", "speed_mps", "bandwidth_hz"])
        link_types.append(replace(base, **spec))

    run = take_section(data["run"], "run", ["seed", "n_max"])
    return Scenario(
        usns=tuple(usns),
        auv_template=AuvNode(v_max=auv.get("v_max", config.V_MAX),
                             E_max=auv.get("E_max", config.E_MAX)),
        usv=Usv(Point3(usv.get("x", box.width / 2.0), usv.get("y", box.length / 2.0), 0.0)),
        link_types=tuple(link_types),
        channel=channel_from_dict(data["channel"]),
        energy=_dataclass_from(EnergyParams, data["energy"], "energy"),
        seed=int(run.get("seed", config.DEFAULT_SEED)),
        n_max=int(run.get("n_max", config.N_MAX)),
        box=box,
    )


def save_scenario(s: Scenario, path: str):
    """Write a scenario file (floats are written with full precision)."""
    with open(path, "w") as f:
        json.dump(scenario_to_dict(s), f, indent=2)
        f.write("\n")


def load_scenario(path: str) -> Scenario:
    """Load, parse and validate a scenario file."""
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: not valid JSON ({exc})") from exc
    scenario = scenario_from_dict(data)
    violations = validate_scenario(scenario)
    if violations:
        raise InvalidConfig(f"{path}: " + "; ".join(violations))
    return scenario
