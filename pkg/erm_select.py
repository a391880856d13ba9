"""
Emergency response mode selection.

Every USN ends in exactly one mode:
    ERM 1 (set A): direct link to the USV
    ERM 2 (set B): one hop through a relay in A
    ERM 3 (set C): isolated, served by an AUV
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import config
from agent import RLHyper, TrainingResult, select_best, select_relays
from channel import InterferenceState, LinkBudget, assign_direct_links, link_budgets, pick_best
from entities import Scenario
from errors import AllInfeasible, EmptyRelaySet
from relay_env import PairBudgets, reward

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ErmAssignment:
    set_a: Tuple[int, ...]
    set_b: Dict[int, Tuple[int, LinkBudget]]  # node -> (relay, budget to the relay)
    set_c: Tuple[int, ...]
    direct: Dict[int, LinkBudget] = field(default_factory=dict)  # A members' links to the USV

    def mode(self, node_id: int) -> int:
        if node_id in self.set_a:
            return 1
        if node_id in self.set_b:
            return 2
        if node_id in self.set_c:
            return 3
        raise KeyError(node_id)

    def phi(self, node_id: int) -> int:
        """1 when the node transmits straight to the USV."""
        return int(node_id in self.set_a)

    def beta(self, node_id: int, relay: int) -> int:
        """1 when `relay` is the node's selected relay."""
        chosen = self.set_b.get(node_id)
        return int(chosen is not None and chosen[0] == relay)

    def relay_of(self, node_id: int) -> Optional[int]:
        chosen = self.set_b.get(node_id)
        return chosen[0] if chosen else None

    @property
    def sizes(self) -> Tuple[int, int, int]:
        return (len(self.set_a), len(self.set_b), len(self.set_c))

    def violations(self, node_ids: Sequence[int]) -> List[str]:
        """Partition problems against the full node set; empty when consistent."""
        problems = []
        a, b, c = set(self.set_a), set(self.set_b), set(self.set_c)
        if a & b or a & c or b & c:
            problems.append("sets overlap")
        if a | b | c != set(node_ids):
            problems.append("sets do not cover every node")
        for i, (k, _) in self.set_b.items():
            if k not in a:
                problems.append(f"node {i}: relay {k} is not in A")
        return problems


def detect_relays(s: Scenario) -> Tuple[Tuple[int, ...], Dict[int, LinkBudget]]:
    """
    Nodes whose greedy direct link to the USV passes both gates: outage <= epsilon
    and SINR >= gamma under same-family interference.

    Returns:
        (relay ids in ascending order, node id -> direct LinkBudget for every
        node that has a feasible direct link)
    """
    p = s.channel
    assignments, _ = assign_direct_links(s)
    relays = tuple(sorted(i for i, b in assignments.items()
                          if b.outage <= p.epsilon and b.sinr >= p.gamma))
    logger.info("relay detection: %d of %d USNs reach the USV directly", len(relays), len(s.usns))
    return relays, assignments


def relay_budgets(s: Scenario, node_ids: Sequence[int], relays: Sequence[int]) -> PairBudgets:
    """Budgets of all three link families from each node to each relay (no interference)."""
    quiet = InterferenceState.empty()
    budgets = {}
    for i in node_ids:
        src = s.usn(i).pos
        for k in relays:
            budgets[(i, k)] = link_budgets(src, s.usn(k).pos, quiet, s.channel, s.link_types)
    return budgets


def best_relay_budget(i: int, k: int, budgets: PairBudgets, epsilon: float) -> LinkBudget:
    """
    The link family realizing reward(i, k): highest capacity among those not in
    outage, falling back to the greedy feasible link (or the UL record) when
    every family is in outage.
    """
    pair = budgets[(i, k)]
    usable = [b for b in pair.values() if b.outage <= epsilon]
    if usable:
        return pick_best(usable) if any(b.feasible for b in usable) else max(usable, key=lambda b: b.capacity)
    try:
        return pick_best(pair.values())
    except AllInfeasible:
        return next(iter(pair.values()))


def mean_capacity_threshold(i: int, relays: Sequence[int], budgets: PairBudgets,
                            epsilon: float = config.EPSILON) -> float:
    """
    Mean over relays of node i's best capacity to each relay.

    Raises:
        EmptyRelaySet: no relays
    """
    if not relays:
        raise EmptyRelaySet(f"node {i}: no relays for the capacity threshold")
    return sum(reward(i, k, budgets, epsilon) for k in relays) / len(relays)


def passes_gate(i: int, k: int, budgets: PairBudgets, r_bar: float, epsilon: float) -> bool:
    """Some family to relay k is not in outage and its capacity beats r_bar strictly."""
    return any(b.outage <= epsilon and b.capacity > r_bar for b in budgets[(i, k)].values())


def partition_erm(s: Scenario, relays: Sequence[int], rl_choice: Mapping[int, int],
                  budgets: Optional[PairBudgets] = None,
                  direct: Optional[Mapping[int, LinkBudget]] = None) -> ErmAssignment:
    """
    Final three-way partition.

    Args:
        s: scenario
        relays: set A
        rl_choice: node id -> relay chosen by relay selection, for every node outside A
        budgets: node-to-relay budgets (computed when omitted)
        direct: A members' direct budgets, carried into the result

    Returns:
        ErmAssignment; ties with the mean capacity go to C
    """
    eps = s.channel.epsilon
    relay_set = set(relays)
    others = [i for i in s.node_ids if i not in relay_set]
    if relays:
        missing = [i for i in others if i not in rl_choice]
        if missing:
            raise ValueError(f"no relay choice for nodes {missing}")
        if budgets is None:
            budgets = relay_budgets(s, others, relays)

    set_b: Dict[int, Tuple[int, LinkBudget]] = {}
    set_c: List[int] = []
    for i in others:
        if not relays:
            set_c.append(i)
            continue
        k = rl_choice[i]
        r_bar = mean_capacity_threshold(i, relays, budgets, eps)
        if passes_gate(i, k, budgets, r_bar, eps):
            set_b[i] = (k, best_relay_budget(i, k, budgets, eps))
        else:
            set_c.append(i)

    direct = direct or {}
    result = ErmAssignment(
        set_a=tuple(sorted(relay_set)),
        set_b=set_b,
        set_c=tuple(sorted(set_c)),
        direct={i: direct[i] for i in sorted(relay_set) if i in direct},
    )
    logger.info("ERM partition: |A|=%d |B|=%d |C|=%d", *result.sizes)
    return result


def select_erm(s: Scenario, methods: Sequence[str] = config.METHODS,
               hyper: Optional[RLHyper] = None
               ) -> Tuple[ErmAssignment, Dict[int, Dict[str, TrainingResult]], PairBudgets]:
    """
    Relay detection, relay selection for every other node, then the partition.

    Returns:
        (assignment, node id -> method -> TrainingResult, node-to-relay budgets)
    """
    relays, direct = detect_relays(s)
    relay_set = set(relays)
    others = [i for i in s.node_ids if i not in relay_set]
    if not relays:
        logger.warning("no USN reaches the USV directly; every other node is isolated")
        return partition_erm(s, relays, {}, {}, direct), {}, {}

    budgets = relay_budgets(s, others, relays)
    results = select_relays(s, relays, budgets, methods, hyper) if methods else {}
    if not methods:
        choice = {i: max(relays, key=lambda k: (reward(i, k, budgets, s.channel.epsilon), -k))
                  for i in others}
    else:
        choice = {i: select_best(list(per_method.values())).relay
                  for i, per_method in results.items()}
    return partition_erm(s, relays, choice, budgets, direct), results, budgets
