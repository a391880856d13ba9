"""
Time/energy tradeoff for the AUV fleet: decomposition-based multiobjective
search over (x1 = AUV count, x2 = IUSN transmit power).

Objectives (both minimized):
    f1 = makespan, the longest AUV collection-plus-return time (s)
    f2 = total AUV energy (J)
Constraints, aggregated as a non-negative violation:
    g1 = IUSN power shortfall, g2 = AUV energy overrun
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pymoo.indicators.hv import HV

import config
from auv_deploy import (Cluster, Deployment, cluster_iusns, deploy, energy_violation,
                        member_power_violation)
from entities import Scenario
from utils import dominates, make_rng, non_dominated_indices

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DecisionVector:
    x1: int
    x2: float


@dataclass(frozen=True)
class ObjectivePoint:
    f1: float
    f2: float
    feasible: bool
    constraint_violation: float = 0.0
    n_auvs: int = 0  # AUVs actually deployed (x1 may grow with capacity)

    @property
    def f(self) -> Tuple[float, float]:
        return (self.f1, self.f2)


Entry = Tuple[DecisionVector, ObjectivePoint]


@dataclass
class MoeaConfig:
    n_subproblems: int = config.MOEA_SUBPROBLEMS
    n_neighbors: int = config.MOEA_NEIGHBORS
    generations: int = config.MOEA_GENERATIONS
    blend_alpha: float = config.MOEA_BLEND_ALPHA
    mutation_rate: float = config.MOEA_MUTATION_RATE
    mutation_scale: float = config.MOEA_MUTATION_SCALE
    normalize: bool = config.MOEA_NORMALIZE
    x2_levels: Optional[Tuple[float, ...]] = None  # snap x2 to these values when set
    velocity_mode: str = config.VELOCITY_MODE
    refine: bool = config.REFINE_POSITIONS

    def __post_init__(self):
        if self.n_subproblems < 2:
            raise ValueError(f"n_subproblems must be >= 2, got {self.n_subproblems}")
        if not 2 <= self.n_neighbors <= self.n_subproblems:
            raise ValueError(f"n_neighbors must be in [2, {self.n_subproblems}]")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.x2_levels is not None:
            self.x2_levels = tuple(sorted(float(v) for v in self.x2_levels))
            if not self.x2_levels:
                raise ValueError("x2_levels must not be empty")


class ParetoArchive:
    """
    External population of mutually non-dominated feasible solutions, plus
    the reference point and the subproblem weights.
    """

    def __init__(self, weights: Optional[np.ndarray] = None):
        self.entries: List[Entry] = []
        self.z_star = np.array([math.inf, math.inf])
        self.weights = weights if weights is not None else np.zeros((0, 2))
        self.z_history: List[Tuple[float, float]] = []

    def update_reference(self, f: ObjectivePoint):
        self.z_star = np.minimum(self.z_star, f.f)

    def add(self, x: DecisionVector, f: ObjectivePoint) -> bool:
        """Insert a feasible point unless dominated or already present; drop what it dominates."""
        if not f.feasible:
            return False
        for _, g in self.entries:
            if g.f == f.f or dominates(g.f, f.f):
                return False
        self.entries = [(y, g) for y, g in self.entries if not dominates(f.f, g.f)]
        self.entries.append((x, f))
        self.entries.sort(key=lambda e: (e[1].f1, e[1].f2, e[0].x1, e[0].x2))
        return True

    def points(self) -> List[Entry]:
        return list(self.entries)

    def is_non_dominated(self) -> bool:
        fs = [f.f for _, f in self.entries]
        return len(non_dominated_indices(fs)) == len(fs)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


class MopProblem:
    """
    Objective evaluation with caches: clusters depend on x1 only, full
    evaluations on (x1, x2).
    """

    def __init__(self, s: Scenario, c_ids: Sequence[int],
                 velocity_mode: str = config.VELOCITY_MODE,
                 x2_levels: Optional[Sequence[float]] = None,
                 refine: bool = config.REFINE_POSITIONS):
        if not c_ids:
            raise ValueError("no isolated nodes")
        self.s = s
        self.c_ids = tuple(sorted(c_ids))
        self.velocity_mode = velocity_mode
        self.x2_levels = tuple(sorted(x2_levels)) if x2_levels is not None else None
        self.refine = refine
        self.x1_max = len(self.c_ids)
        self.x2_max = s.max_link_power
        self._clusters: Dict[int, List[Cluster]] = {}
        self._cache: Dict[Tuple[int, float], Tuple[ObjectivePoint, Deployment]] = {}

    def repair(self, x1: float, x2: float) -> DecisionVector:
        """Round and clamp x1, clamp x2, then snap x2 to the nearest level."""
        x1 = int(min(max(int(round(x1)), 1), self.x1_max))
        x2 = float(min(max(x2, 0.0), self.x2_max))
        if self.x2_levels:
            x2 = min(self.x2_levels, key=lambda v: (abs(v - x2), v))
        return DecisionVector(x1, x2)

    def clusters(self, x1: int) -> List[Cluster]:
        if x1 not in self._clusters:
            self._clusters[x1] = cluster_iusns(self.s, self.c_ids, x1, refine=self.refine)
        return self._clusters[x1]

    def deployment(self, x: DecisionVector) -> Deployment:
        return self.evaluate_full(x)[1]

    def evaluate_full(self, x: DecisionVector) -> Tuple[ObjectivePoint, Deployment]:
        key = (x.x1, x.x2)
        if key not in self._cache:
            dep = deploy(self.s, self.c_ids, x.x1, x.x2, self.velocity_mode,
                         clusters=self.clusters(x.x1))
            violation = member_power_violation(self.s, dep) + energy_violation(self.s, dep)
            point = ObjectivePoint(
                f1=dep.makespan,
                f2=dep.total_energy,
                feasible=violation == 0.0,
                constraint_violation=violation,
                n_auvs=dep.n_auvs,
            )
            self._cache[key] = (point, dep)
        return self._cache[key]

    def evaluate(self, x: DecisionVector) -> ObjectivePoint:
        return self.evaluate_full(x)[0]

    @property
    def evaluations(self) -> int:
        return len(self._cache)


def evaluate(x: DecisionVector, s: Scenario, c_ids: Sequence[int],
             velocity_mode: str = config.VELOCITY_MODE) -> ObjectivePoint:
    """Objectives and constraint violation of one decision (repaired into bounds first)."""
    problem = MopProblem(s, c_ids, velocity_mode)
    return problem.evaluate(problem.repair(x.x1, x.x2))


def tchebycheff(f, lam: Sequence[float], z_star: Sequence[float],
                scale: Optional[Sequence[float]] = None) -> float:
    """
    Weighted max deviation from the reference point, max_i lam_i |f_i - z_i|,
    optionally with each deviation divided by scale_i.
    """
    fv = f.f if isinstance(f, ObjectivePoint) else tuple(f)
    scale = scale if scale is not None else (1.0, 1.0)
    return max(lam[i] * abs(fv[i] - z_star[i]) / scale[i] for i in range(2))


def simplex_weights(n: int) -> np.ndarray:
    """n evenly spaced weight pairs from (0, 1) to (1, 0)."""
    t = np.linspace(0.0, 1.0, n)
    return np.column_stack([t, 1.0 - t])


def neighborhoods(weights: np.ndarray, t: int) -> np.ndarray:
    """Indices of the t closest weight vectors for each subproblem (itself included)."""
    d = np.linalg.norm(weights[:, None, :] - weights[None, :, :], axis=2)
    return np.argsort(d, axis=1, kind="stable")[:, :t]


def _better(child: ObjectivePoint, incumbent: ObjectivePoint, lam, z_star, scale) -> bool:
    """Feasibility first; feasible pairs by Tchebycheff (<= accepts), infeasible by violation."""
    if child.feasible and incumbent.feasible:
        return tchebycheff(child, lam, z_star, scale) <= tchebycheff(incumbent, lam, z_star, scale)
    if child.feasible != incumbent.feasible:
        return child.feasible
    return child.constraint_violation <= incumbent.constraint_violation


def _objective_scale(points: Sequence[ObjectivePoint], z_star: np.ndarray) -> Tuple[float, float]:
    out = []
    for i in range(2):
        finite = [p.f[i] for p in points if math.isfinite(p.f[i])]
        span = (max(finite) - z_star[i]) if finite else 0.0
        out.append(span if span > 0 and math.isfinite(span) else 1.0)
    return tuple(out)


def _blend(a: float, b: float, alpha: float, rng: np.random.Generator) -> float:
    lo, hi = min(a, b), max(a, b)
    span = hi - lo
    return float(rng.uniform(lo - alpha * span, hi + alpha * span)) if span > 0 else lo


def _offspring(xm: DecisionVector, xn: DecisionVector, problem: MopProblem,
               cfg: MoeaConfig, rng: np.random.Generator) -> DecisionVector:
    lo1, hi1 = sorted((xm.x1, xn.x1))
    x1 = int(rng.integers(lo1, hi1 + 1))
    x2 = _blend(xm.x2, xn.x2, cfg.blend_alpha, rng)
    if rng.random() < cfg.mutation_rate:
        x1 += int(rng.choice((-1, 1)))
    if rng.random() < cfg.mutation_rate:
        x2 += float(rng.normal(0.0, cfg.mutation_scale * problem.x2_max))
    return problem.repair(x1, x2)


def moead_run(s: Scenario, c_ids: Sequence[int], cfg: Optional[MoeaConfig] = None,
              seed: Optional[int] = None, problem: Optional[MopProblem] = None) -> ParetoArchive:
    """
    MOEA/D with Tchebycheff decomposition.

    Each generation, every subproblem mates two neighbors, repairs the child
    into bounds, updates the reference point, replaces the neighbors the child
    beats and offers it to the archive.

    Returns:
        ParetoArchive (mutually non-dominated on return)
    """
    cfg = cfg or MoeaConfig()
    seed = s.seed if seed is None else seed
    problem = problem or MopProblem(s, c_ids, cfg.velocity_mode, cfg.x2_levels, cfg.refine)
    rng = make_rng(seed, "moead")

    n = cfg.n_subproblems
    weights = simplex_weights(n)
    hoods = neighborhoods(weights, cfg.n_neighbors)
    archive = ParetoArchive(weights)

    # spread start: x1 cycles through its range, x2 sweeps its range
    population: List[DecisionVector] = []
    for k in range(n):
        population.append(problem.repair(1 + k % problem.x1_max,
                                         problem.x2_max * k / (n - 1)))
    values = [problem.evaluate(x) for x in population]
    for x, f in zip(population, values):
        archive.update_reference(f)
        archive.add(x, f)
    archive.z_history.append(tuple(archive.z_star))

    for gen in range(cfg.generations):
        for k in range(n):
            m_idx, n_idx = rng.choice(hoods[k], size=2, replace=False)
            child = _offspring(population[m_idx], population[n_idx], problem, cfg, rng)
            fc = problem.evaluate(child)
            archive.update_reference(fc)
            scale = _objective_scale(values + [fc], archive.z_star) if cfg.normalize else None
            for j in hoods[k]:
                if _better(fc, values[j], weights[j], archive.z_star, scale):
                    population[j] = child
                    values[j] = fc
            archive.add(child, fc)
        archive.z_history.append(tuple(archive.z_star))
        if __debug__:
            assert archive.is_non_dominated(), "archive holds a dominated point"
        logger.debug("moead generation %d: archive %d, z*=(%.4e, %.4e)",
                     gen + 1, len(archive), *archive.z_star)

    logger.info("moead: %d generations, %d distinct evaluations, %d archived points",
                cfg.generations, problem.evaluations, len(archive))
    return archive


# --- tradeoff selection ---

def objective_weights(entries: Sequence[Entry]) -> List[Tuple[float, float]]:
    """
    Normalized per-point weights: the distance of each objective from its
    worst archived value, scaled by the objective's range, then normalized
    to sum to one. An objective with zero range has weight 0.5 at every
    point, which leaves 0.5 for the other.
    """
    fs = np.array([f.f for _, f in entries], dtype=float)
    lo, hi = fs.min(axis=0), fs.max(axis=0)
    if np.any(hi <= lo):
        return [(0.5, 0.5)] * len(fs)
    out = []
    for row in fs:
        raw = (hi - row) / (hi - lo)
        total = raw[0] + raw[1]
        out.append((float(raw[0] / total), float(raw[1] / total)) if total > 0 else (0.5, 0.5))
    return out


def _ordered(archive) -> List[Entry]:
    entries = archive.points() if isinstance(archive, ParetoArchive) else list(archive)
    if not entries:
        raise ValueError("empty archive")
    return sorted(entries, key=lambda e: (e[1].f1, e[1].f2, e[0].x1, e[0].x2))


def knee_select(archive) -> Entry:
    """Point whose smaller normalized weight is largest; ties go to the lower f1."""
    entries = _ordered(archive)
    weights = objective_weights(entries)
    best = max(range(len(entries)), key=lambda k: (min(weights[k]), -k))
    return entries[best]


def energy_efficiency_select(archive) -> Entry:
    """Point with the smallest energy per unit of response time (f2 / f1)."""
    entries = _ordered(archive)
    if any(f.f1 <= 0 for _, f in entries):
        raise ValueError("f1 must be > 0 for every archived point")
    best = min(range(len(entries)), key=lambda k: (entries[k][1].f2 / entries[k][1].f1, k))
    return entries[best]


# --- verification helpers ---

def evaluate_grid(s: Scenario, c_ids: Sequence[int], x2_grid: Sequence[float],
                  velocity_mode: str = config.VELOCITY_MODE,
                  x1_values: Optional[Sequence[int]] = None,
                  problem: Optional[MopProblem] = None) -> List[Entry]:
    """Every (x1, x2) combination, x1 over 1..|C| unless given."""
    problem = problem or MopProblem(s, c_ids, velocity_mode)
    x1s = x1_values if x1_values is not None else range(1, len(c_ids) + 1)
    out = []
    for x1 in x1s:
        for x2 in x2_grid:
            x = DecisionVector(int(x1), float(x2))
            out.append((x, problem.evaluate(x)))
    return out


def pareto_filter(entries: Sequence[Entry]) -> List[Entry]:
    """Non-dominated feasible entries, one per distinct objective pair."""
    feasible = [e for e in entries if e[1].feasible]
    keep = non_dominated_indices([f.f for _, f in feasible])
    seen = set()
    front = []
    for k in keep:
        x, f = feasible[k]
        if f.f not in seen:
            seen.add(f.f)
            front.append((x, f))
    return sorted(front, key=lambda e: (e[1].f1, e[1].f2, e[0].x1, e[0].x2))


def brute_force_pareto(s: Scenario, c_ids: Sequence[int], x2_grid: Sequence[float],
                       velocity_mode: str = config.VELOCITY_MODE,
                       problem: Optional[MopProblem] = None) -> List[Entry]:
    """Exact front over the full (x1, x2) grid."""
    return pareto_filter(evaluate_grid(s, c_ids, x2_grid, velocity_mode, problem=problem))


def makespan_rises(entries: Sequence[Entry]) -> List[float]:
    """
    x2 values at which some step from x1 to the next larger x1 raised f1,
    looking only at feasible points.
    """
    columns: Dict[float, List[Tuple[int, float]]] = {}
    for x, f in entries:
        if f.feasible:
            columns.setdefault(x.x2, []).append((x.x1, f.f1))
    rises = []
    for x2, column in sorted(columns.items()):
        column.sort()
        if any(b[1] > a[1] * (1.0 + 1e-12) for a, b in zip(column, column[1:])):
            rises.append(x2)
    return rises


def hypervolume(points: Sequence[Tuple[float, float]], ref: Sequence[float]) -> float:
    """
    Area dominated by the points and bounded by the reference point (minimization).
    Points not strictly better than the reference in both objectives add nothing.
    """
    ref_point = np.asarray(ref, dtype=float)
    F = np.array([p for p in points if p[0] < ref_point[0] and p[1] < ref_point[1]], dtype=float)
    if len(F) == 0:
        return 0.0
    return float(HV(ref_point=ref_point)(F))


def front_reference(points: Sequence[Tuple[float, float]], margin: float = 1.1) -> Tuple[float, float]:
    """Reference point just beyond the worst value of each objective."""
    F = np.asarray(points, dtype=float)
    return (float(F[:, 0].max() * margin), float(F[:, 1].max() * margin))
