"""
Pipeline orchestration: scenario -> ERM partition -> relay-selection summary
-> AUV deployment -> time/energy tradeoff -> plot data.

Every stage reads its inputs from the output directory when they are not
already in memory, so stages can run on their own. Artifacts are versioned
JSON; plot series are CSV. No wall-clock values are written.
"""
import csv
import hashlib
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

import config
from agent import METHOD_PRIORITY, RLHyper, nearest_relay_baseline, select_best
from auv_deploy import Deployment, deploy
from channel import LinkBudget
from entities import Box, ScenarioConfig, Scenario
from erm_select import ErmAssignment, relay_budgets, select_erm
from errors import (FormatVersionMismatch, InvalidConfig, StageError, StageInputMissing,
                    UecnError)
from moea import (MoeaConfig, MopProblem, energy_efficiency_select, front_reference, hypervolume,
                  knee_select, moead_run)
from relay_env import reward
from scenario_loader import (take_section, generate_scenario, load_scenario, save_scenario,
                             validate_scenario)

logger = logging.getLogger(__name__)

STAGE_ORDER = ("generate", "erm", "rl", "deploy", "mop", "plots")
SELECTIONS = ("knee", "ratio")

RL_KEYS = ("alpha", "beta", "ell", "episodes", "epochs", "dqn_episodes", "window", "hidden",
           "learning_rate", "replay_capacity", "minibatch")
MOEA_KEYS = ("n_subproblems", "n_neighbors", "generations", "blend_alpha", "mutation_rate",
             "mutation_scale", "normalize", "x2_levels")

ARTIFACTS = {
    "scenario": "scenario.json",
    "relays": "relays.json",
    "partition": "partition.json",
    "rl_summary": "rl_summary.json",
    "deployment": "deployment.json",
    "front": "front.json",
    "report": "report.json",
    "manifest": "manifest.json",
}
SERIES = {
    "nodes": "nodes.csv",
    "rl_rewards": "rl_rewards.csv",
    "clusters": "clusters.csv",
    "auv_plans": "auv_plans.csv",
    "front": "front.csv",
}


# --- run configuration ---

@dataclass
class RunConfig:
    scenario_path: Optional[str] = None
    generate: Optional[ScenarioConfig] = None
    stages: Tuple[str, ...] = STAGE_ORDER
    methods: Tuple[str, ...] = config.METHODS
    velocity_mode: str = config.VELOCITY_MODE
    selection: str = config.SELECTION
    output_dir: str = config.OUTPUT_DIR
    seed: Optional[int] = None
    rl: RLHyper = field(default_factory=RLHyper)
    moea: MoeaConfig = field(default_factory=MoeaConfig)
    x2_levels: Optional[int] = config.MOEA_X2_LEVELS
    deploy_x1: Optional[int] = None
    deploy_x2: Optional[float] = None
    refine_positions: bool = config.REFINE_POSITIONS

    def validate(self):
        if (self.scenario_path is None) == (self.generate is None):
            raise InvalidConfig("give exactly one of 'scenario' and 'generate'")
        unknown = [st for st in self.stages if st not in STAGE_ORDER]
        if unknown:
            raise InvalidConfig(f"unknown stages: {unknown}")
        bad = [m for m in self.methods if m not in METHOD_PRIORITY]
        if bad:
            raise InvalidConfig(f"unknown methods: {bad}")
        if self.velocity_mode not in ("budget", "corrected"):
            raise InvalidConfig("velocity_mode must be 'budget' or 'corrected'")
        if self.selection not in SELECTIONS:
            raise InvalidConfig(f"selection must be one of {SELECTIONS}")
        if self.seed is not None and self.seed < 0:
            raise InvalidConfig("seed must be non-negative")
        if self.x2_levels is not None and self.x2_levels < 1:
            raise InvalidConfig("x2_levels must be >= 1")
        if self.deploy_x1 is not None and self.deploy_x1 < 1:
            raise InvalidConfig("deploy.x1 must be >= 1")
        if self.deploy_x2 is not None and self.deploy_x2 < 0:
            raise InvalidConfig("deploy.x2 must be >= 0")
        return self

    def ordered_stages(self) -> List[str]:
        return [st for st in STAGE_ORDER if st in self.stages]


def _generation_from_dict(data: Dict[str, Any]) -> ScenarioConfig:
    data = take_section(data, "generate", ["n_usns", "box", "usv_xy", "packet_size", "n_max"])
    base = ScenarioConfig()
    box = Box(**take_section(data.get("box", {}), "generate.box", ["width", "length", "depth"]))
    usv_xy = data.get("usv_xy")
    return replace(base,
                   n_usns=int(data.get("n_usns", base.n_usns)),
                   box=box,
                   usv_xy=tuple(usv_xy) if usv_xy is not None else None,
                   packet_size=float(data.get("packet_size", base.packet_size)),
                   n_max=int(data.get("n_max", base.n_max)))


def run_config_from_dict(data: Dict[str, Any], base_dir: str = ".") -> RunConfig:
    """Parse a run-config object; unknown keys raise InvalidConfig."""
    take_section(data, "run config", ["format_version", "scenario", "generate", "stages",
                                      "methods", "velocity_mode", "selection", "output_dir",
                                      "seed", "rl", "moea", "deploy"])
    version = data.get("format_version", config.FORMAT_VERSION)
    if version != config.FORMAT_VERSION:
        raise FormatVersionMismatch(f"run config format_version {version}, "
                                    f"expected {config.FORMAT_VERSION}")
    try:
        rl_data = dict(take_section(data.get("rl", {}), "rl", RL_KEYS))
        if "hidden" in rl_data:
            rl_data["hidden"] = tuple(rl_data["hidden"])
        rl = RLHyper(**rl_data)
        moea_data = dict(take_section(data.get("moea", {}), "moea", MOEA_KEYS))
        x2_levels = moea_data.pop("x2_levels", config.MOEA_X2_LEVELS)
        moea = MoeaConfig(**moea_data)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(str(exc)) from exc

    deploy_block = take_section(data.get("deploy", {}), "deploy", ["x1", "x2", "refine"])
    scenario = data.get("scenario")
    cfg = RunConfig(
        scenario_path=os.path.join(base_dir, scenario) if scenario is not None else None,
        generate=_generation_from_dict(data["generate"]) if "generate" in data else None,
        stages=tuple(data.get("stages", STAGE_ORDER)),
        methods=tuple(data.get("methods", config.METHODS)),
        velocity_mode=data.get("velocity_mode", config.VELOCITY_MODE),
        selection=data.get("selection", config.SELECTION),
        output_dir=data.get("output_dir", config.OUTPUT_DIR),
        seed=data.get("seed"),
        rl=rl,
        moea=moea,
        x2_levels=x2_levels,
        deploy_x1=deploy_block.get("x1"),
        deploy_x2=deploy_block.get("x2"),
        refine_positions=bool(deploy_block.get("refine", config.REFINE_POSITIONS)),
    )
    return cfg.validate()


def load_run_config(path: str) -> RunConfig:
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: not valid JSON ({exc})") from exc
    return run_config_from_dict(data, os.path.dirname(path))


# --- report ---

@dataclass
class RunReport:
    output_dir: str
    stages: List[str] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)  # seconds, logged only
    partition_sizes: Optional[Tuple[int, int, int]] = None
    rl_summary: Optional[Dict[str, Any]] = None
    deployment_summary: Optional[Dict[str, Any]] = None
    front_summary: Optional[Dict[str, Any]] = None
    notices: List[str] = field(default_factory=list)
    files: List[str] = field(default_factory=list)

    def add_file(self, name: str):
        if name not in self.files:
            self.files.append(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format_version": config.FORMAT_VERSION,
            "stages": self.stages,
            "partition_sizes": list(self.partition_sizes) if self.partition_sizes else None,
            "rl_summary": self.rl_summary,
            "deployment_summary": self.deployment_summary,
            "front_summary": self.front_summary,
            "notices": self.notices,
            "files": sorted(self.files),
        }


# --- artifact I/O ---

def write_json(path: str, payload: Dict[str, Any]):
    payload = {"format_version": config.FORMAT_VERSION, **payload}
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def read_artifact(output_dir: str, key: str, stage: str) -> Dict[str, Any]:
    """
    Raises:
        StageInputMissing: the artifact does not exist
        FormatVersionMismatch: the artifact was written by another format version
    """
    path = os.path.join(output_dir, ARTIFACTS[key])
    if not os.path.exists(path):
        raise StageInputMissing(f"stage '{stage}' needs {ARTIFACTS[key]} in {output_dir}")
    with open(path, "r") as f:
        data = json.load(f)
    if data.get("format_version") != config.FORMAT_VERSION:
        raise FormatVersionMismatch(f"{path}: format_version {data.get('format_version')}, "
                                    f"expected {config.FORMAT_VERSION}")
    return data


def budget_to_dict(b: LinkBudget) -> Dict[str, Any]:
    return {"link": b.kind.value, "loss_db": b.loss_db, "tx_power": b.tx_power,
            "rx_power": b.rx_power, "sinr": b.sinr, "capacity": b.capacity,
            "outage": b.outage, "feasible": b.feasible, "distance": b.distance}


def deployment_to_dict(dep: Deployment) -> Dict[str, Any]:
    return {
        "x1": dep.x1,
        "x2": dep.x2,
        "velocity_mode": dep.velocity_mode,
        "n_auvs": dep.n_auvs,
        "makespan": dep.makespan,
        "total_energy": dep.total_energy,
        "feasible": dep.feasible,
        "plans": [{
            "auv_id": p.auv_id,
            "x": p.position.x, "y": p.position.y, "z": p.position.z,
            "members": list(p.cluster.members),
            "velocity": p.velocity,
            "t_R": p.t_R, "t_M": p.t_M, "t": p.t,
            "e_R": p.e_R, "e_B": p.e_B, "e_L": p.e_L, "e_S": p.e_S, "e_E": p.e_E,
            "total_energy": p.total_energy,
            "d_j0": p.d_j0, "psi0": p.psi0, "psi1": p.psi1,
            "feasible": p.feasible, "issue": p.issue,
        } for p in dep.plans],
    }


def _deployment_summary(dep: Deployment) -> Dict[str, Any]:
    return {"x1": dep.x1, "x2": dep.x2, "n_auvs": dep.n_auvs, "makespan": dep.makespan,
            "total_energy": dep.total_energy, "feasible": dep.feasible,
            "infeasible_auvs": [p.auv_id for p in dep.plans if not p.feasible]}


# --- stages ---

class Pipeline:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = cfg.output_dir
        self.report = RunReport(output_dir=self.out)
        self.scenario: Optional[Scenario] = None
        self.partition: Optional[Dict[str, Any]] = None

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def _write(self, key: str, payload: Dict[str, Any]):
        write_json(self.path(ARTIFACTS[key]), payload)
        self.report.add_file(ARTIFACTS[key])

    def _scenario(self, stage: str) -> Scenario:
        if self.scenario is None:
            read_artifact(self.out, "scenario", stage)
            self.scenario = load_scenario(self.path(ARTIFACTS["scenario"]))
        return self.scenario

    def _partition(self, stage: str) -> Dict[str, Any]:
        if self.partition is None:
            self.partition = read_artifact(self.out, "partition", stage)
        return self.partition

    def _isolated(self, stage: str) -> List[int]:
        return list(self._partition(stage)["set_c"])

    def stage_generate(self):
        cfg = self.cfg
        if cfg.scenario_path is not None:
            s = load_scenario(cfg.scenario_path)
            if cfg.seed is not None:
                s = replace(s, seed=cfg.seed)
        else:
            seed = cfg.seed if cfg.seed is not None else config.DEFAULT_SEED
            s = generate_scenario(cfg.generate, seed)
        violations = validate_scenario(s)
        if violations:
            raise InvalidConfig("; ".join(violations))
        save_scenario(s, self.path(ARTIFACTS["scenario"]))
        self.report.add_file(ARTIFACTS["scenario"])
        self.scenario = s

    def stage_erm(self):
        s = self._scenario("erm")
        assignment, results, _ = select_erm(s, self.cfg.methods, self.cfg.rl)
        self._write("relays", {
            "relays": list(assignment.set_a),
            "direct": [{"node": i, **budget_to_dict(b)} for i, b in sorted(assignment.direct.items())],
        })
        self.partition = _partition_to_dict(assignment, results)
        self._write("partition", self.partition)
        self.report.partition_sizes = assignment.sizes

    def stage_rl(self):
        s = self._scenario("rl")
        part = self._partition("rl")
        relays = list(part["set_a"])
        learners = [int(node) for node in part["rl"]]
        summary: Dict[str, Any] = {"learners": len(learners), "methods": {}}
        if relays and learners:
            budgets = relay_budgets(s, learners, relays)
            eps = s.channel.epsilon
            per_method: Dict[str, List[float]] = {}
            best, baseline, fallbacks = [], [], 0
            for node in learners:
                entries = part["rl"][str(node)]
                for method, res in entries.items():
                    per_method.setdefault(method, []).append(reward(node, res["relay"], budgets, eps))
                    fallbacks += int(res.get("fallback", False))
                best.append(max(r["reward"] for r in entries.values()))
                baseline.append(nearest_relay_baseline(s, node, relays, budgets)[1])
            summary["methods"] = {m: float(np.mean(v)) for m, v in sorted(per_method.items(),
                                  key=lambda kv: METHOD_PRIORITY[kv[0]])}
            summary["best_of_methods"] = float(np.mean(best))
            summary["nearest_relay_baseline"] = float(np.mean(baseline))
            summary["dqn_fallbacks"] = fallbacks
        else:
            self._notice("rl: no relays or no learner nodes, nothing to summarize")
        self._write("rl_summary", summary)
        self.report.rl_summary = summary

    def stage_deploy(self):
        s = self._scenario("deploy")
        c_ids = self._isolated("deploy")
        if not c_ids:
            self._notice("deploy: no isolated nodes, stage skipped")
            return
        x1 = self.cfg.deploy_x1 or max(1, math.ceil(len(c_ids) / s.n_max))
        x1 = min(x1, len(c_ids))
        x2 = self.cfg.deploy_x2 if self.cfg.deploy_x2 is not None else s.max_link_power
        dep = deploy(s, c_ids, x1, x2, self.cfg.velocity_mode, refine=self.cfg.refine_positions)
        self._write("deployment", deployment_to_dict(dep))
        self.report.deployment_summary = _deployment_summary(dep)

    def stage_mop(self):
        s = self._scenario("mop")
        c_ids = self._isolated("mop")
        if not c_ids:
            self._notice("mop: no isolated nodes, stage skipped")
            return
        moea_cfg = replace(self.cfg.moea,
                           velocity_mode=self.cfg.velocity_mode,
                           refine=self.cfg.refine_positions,
                           x2_levels=x2_grid(s, self.cfg.x2_levels))
        problem = MopProblem(s, c_ids, moea_cfg.velocity_mode, moea_cfg.x2_levels, moea_cfg.refine)
        archive = moead_run(s, c_ids, moea_cfg, seed=self.cfg.seed, problem=problem)
        entries = archive.points()

        front: Dict[str, Any] = {
            "velocity_mode": moea_cfg.velocity_mode,
            "z_star": [float(v) for v in archive.z_star],
            "points": [_entry_to_dict(x, f) for x, f in entries],
            "knee": None, "ratio": None, "selected": None,
            "single_auv": None, "benefit_percent": None, "hypervolume": None,
        }
        if entries:
            knee = knee_select(archive)
            ratio = energy_efficiency_select(archive) if all(f.f1 > 0 for _, f in entries) else None
            chosen = knee if self.cfg.selection == "knee" or ratio is None else ratio
            front["knee"] = _entry_to_dict(*knee)
            front["ratio"] = _entry_to_dict(*ratio) if ratio else None
            front["selected"] = {"rule": self.cfg.selection, **_entry_to_dict(*chosen)}
            ref = front_reference([f.f for _, f in entries])
            front["hypervolume"] = {"ref": list(ref),
                                    "value": hypervolume([f.f for _, f in entries], ref)}

            x_sel, f_sel = chosen
            single = deploy(s, c_ids, 1, x_sel.x2, moea_cfg.velocity_mode,
                            n_max=len(c_ids), refine=moea_cfg.refine)
            front["single_auv"] = {"f1": single.makespan, "f2": single.total_energy,
                                   "feasible": single.feasible}
            if single.makespan > 0:
                front["benefit_percent"] = 100.0 * (single.makespan - f_sel.f1) / single.makespan
            front["selected_deployment"] = deployment_to_dict(problem.deployment(x_sel))
        else:
            self._notice("mop: no feasible tradeoff point found")

        self._write("front", front)
        self.report.front_summary = {
            "archive_size": len(entries),
            "z_star": front["z_star"],
            "selected": front["selected"],
            "benefit_percent": front["benefit_percent"],
        }

    def stage_plots(self):
        for name in emit_plots(self.report, self._scenario("plots")):
            self.report.add_file(name)

    def _notice(self, text: str):
        logger.warning(text)
        self.report.notices.append(text)

    def run(self) -> RunReport:
        os.makedirs(self.out, exist_ok=True)
        for stage in self.cfg.ordered_stages():
            runner = getattr(self, f"stage_{stage}")
            start = time.perf_counter()
            try:
                runner()
            except (StageInputMissing, FormatVersionMismatch, InvalidConfig, OSError):
                raise
            except (UecnError, ValueError, ArithmeticError) as exc:
                raise StageError(stage, exc) from exc
            self.report.timings[stage] = time.perf_counter() - start
            self.report.stages.append(stage)
            logger.info("stage %s done in %.2f s", stage, self.report.timings[stage])

        write_json(self.path(ARTIFACTS["report"]), self.report.to_dict())
        self.report.add_file(ARTIFACTS["report"])
        write_manifest(self.out)
        self.report.add_file(ARTIFACTS["manifest"])
        return self.report


def run_pipeline(cfg: RunConfig) -> RunReport:
    """
    Run the selected stages in dependency order.

    Raises:
        StageInputMissing: an upstream artifact is absent
        StageError: a stage failed (carries the stage name)
    """
    cfg.validate()
    return Pipeline(cfg).run()


def x2_grid(s: Scenario, levels: Optional[int]) -> Optional[Tuple[float, ...]]:
    """Log-spaced power levels up to the largest link power (None = continuous)."""
    if levels is None:
        return None
    top = s.max_link_power
    if levels == 1:
        return (top,)
    return tuple(float(v) for v in np.geomspace(top * config.MOEA_X2_MIN_FRACTION, top, levels))


def _entry_to_dict(x, f) -> Dict[str, Any]:
    return {"x1": x.x1, "x2": x.x2, "f1": f.f1, "f2": f.f2, "feasible": f.feasible,
            "constraint_violation": f.constraint_violation, "n_auvs": f.n_auvs}


def _partition_to_dict(assignment: ErmAssignment, results) -> Dict[str, Any]:
    rl = {}
    for node, per_method in sorted(results.items()):
        rl[str(node)] = {
            method: {
                "relay": res.relay,
                "reward": res.reward,
                "fallback": res.fallback,
                "trace": [[t.episode, t.mean_reward, t.relay] for t in res.trace],
            }
            for method, res in sorted(per_method.items(), key=lambda kv: METHOD_PRIORITY[kv[0]])
        }
    return {
        "set_a": list(assignment.set_a),
        "set_b": [{"node": i, "relay": k, **budget_to_dict(b)}
                  for i, (k, b) in sorted(assignment.set_b.items())],
        "set_c": list(assignment.set_c),
        "best": {str(node): select_best(list(per_method.values())).method
                 for node, per_method in sorted(results.items())},
        "rl": rl,
    }


# --- checksums ---

def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(output_dir: str) -> Dict[str, str]:
    """SHA-256 of every known artifact and series present in the directory."""
    names = sorted(n for n in list(ARTIFACTS.values()) + list(SERIES.values())
                   if n != ARTIFACTS["manifest"] and os.path.exists(os.path.join(output_dir, n)))
    digests = {n: file_sha256(os.path.join(output_dir, n)) for n in names}
    write_json(os.path.join(output_dir, ARTIFACTS["manifest"]), {"sha256": digests})
    return digests


# --- plot data ---

def _write_csv(path: str, header: Sequence[str], rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _optional(output_dir: str, key: str) -> Optional[Dict[str, Any]]:
    try:
        return read_artifact(output_dir, key, "plots")
    except StageInputMissing:
        return None


def emit_plots(report: RunReport, s: Scenario) -> List[str]:
    """
    Write the plot-ready series from the artifacts in the report's output
    directory. Series whose source artifact is absent get a header only.

    Returns:
        File names written
    """
    out = report.output_dir
    part = _optional(out, "partition")
    deployment = _optional(out, "deployment")
    front = _optional(out, "front")

    mode, relay_of = {}, {}
    if part:
        for i in part["set_a"]:
            mode[i] = 1
        for rec in part["set_b"]:
            mode[rec["node"]] = 2
            relay_of[rec["node"]] = rec["relay"]
        for i in part["set_c"]:
            mode[i] = 3

    _write_csv(os.path.join(out, SERIES["nodes"]), ["id", "x", "y", "z", "erm", "relay"],
               ([u.id, u.pos.x, u.pos.y, u.pos.z, mode.get(u.id, ""), relay_of.get(u.id, "")]
                for u in s.usns))

    def reward_rows():
        for node, per_method in (part or {}).get("rl", {}).items():
            for method, res in per_method.items():
                for episode, mean_reward, relay in res["trace"]:
                    yield [int(node), method, episode, mean_reward, relay]

    _write_csv(os.path.join(out, SERIES["rl_rewards"]),
               ["node", "method", "episode", "mean_reward", "relay"], reward_rows())

    plans = deployment["plans"] if deployment else []

    def cluster_rows():
        for p in plans:
            for i in p["members"]:
                u = s.usn(i)
                yield [p["auv_id"], i, u.pos.x, u.pos.y, u.pos.z, p["x"], p["y"], p["z"]]

    _write_csv(os.path.join(out, SERIES["clusters"]),
               ["auv_id", "node", "x", "y", "z", "auv_x", "auv_y", "auv_z"], cluster_rows())

    plan_cols = ["auv_id", "x", "y", "z", "n_members", "velocity", "t_R", "t_M",
                 "e_R", "e_B", "e_L", "e_S", "e_E", "total_energy", "feasible"]
    _write_csv(os.path.join(out, SERIES["auv_plans"]), plan_cols,
               ([p["auv_id"], p["x"], p["y"], p["z"], len(p["members"]), p["velocity"],
                 p["t_R"], p["t_M"], p["e_R"], p["e_B"], p["e_L"], p["e_S"], p["e_E"],
                 p["total_energy"], int(p["feasible"])] for p in plans))

    points = front["points"] if front else []
    knee = (front or {}).get("knee")
    ratio = (front or {}).get("ratio")

    def flag(pt, mark):
        return int(mark is not None and pt["x1"] == mark["x1"] and pt["x2"] == mark["x2"])

    _write_csv(os.path.join(out, SERIES["front"]),
               ["x1", "x2", "f1_seconds", "f2_joules", "feasible", "knee_flag", "ee_flag"],
               ([pt["x1"], pt["x2"], pt["f1"], pt["f2"], int(pt["feasible"]),
                 flag(pt, knee), flag(pt, ratio)] for pt in points))

    logger.info("plot series written to %s", out)
    return list(SERIES.values())
