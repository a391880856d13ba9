from dataclasses import replace

import numpy as np

import pytest

from channel import LinkBudget
from entities import Box, LinkKind, ScenarioConfig, default_link_types
from erm_select import (ErmAssignment, detect_relays, mean_capacity_threshold, partition_erm,
                        relay_budgets, select_erm)
from errors import EmptyRelaySet
from relay_env import reward
from scenario_loader import build_scenario, generate_scenario

LINKS = {lt.kind: lt for lt in default_link_types()}


def family_budgets(**families):
    """Budgets for one (node, relay) pair; families not given are in full outage."""
    out = {}
    for kind in LinkKind:
        cap, outage = families.get(kind.value, (0.0, 1.0))
        out[kind] = LinkBudget(link=LINKS[kind], loss_db=0.0, tx_power=1.0, rx_power=1.0,
                               sinr=1.0, capacity=cap, outage=outage)
    return out


def test_node_under_usv_is_a_relay(make_scenario):
    s = make_scenario([(250.0, 250.0, -5.0)])
    relays, direct = detect_relays(s)
    assert relays == (0,)
    assert direct[0].kind == LinkKind.RF
    assert direct[0].outage <= s.channel.epsilon
    assert direct[0].sinr >= s.channel.gamma


def test_acoustic_crowd_fails_sinr_gate(relay_scenario):
    relays, direct = detect_relays(relay_scenario)
    assert relays == (0,)
    assert all(direct[i].kind == LinkKind.UA for i in range(1, 13))
    assert all(direct[i].sinr < relay_scenario.channel.gamma for i in range(1, 13))


def test_unreachable_gamma_empties_relay_set(relay_scenario):
    s = replace(relay_scenario, channel=replace(relay_scenario.channel, gamma=1e12))
    relays, _ = detect_relays(s)
    assert relays == ()
    assignment, results, _ = select_erm(s, methods=())
    assert assignment.set_a == ()
    assert assignment.set_c == s.node_ids
    assert results == {}


def test_single_relay_sends_everyone_to_c(relay_scenario):
    assignment, results, _ = select_erm(relay_scenario, methods=("qlearning",))
    assert assignment.sizes == (1, 0, 12)
    assert assignment.violations(relay_scenario.node_ids) == []
    assert all(per_method["qlearning"].relay == 0 for per_method in results.values())


def test_reward_uses_non_outage_families():
    budgets = {(1, 0): family_budgets(), (2, 0): family_budgets(UA=(1.0e4, 0.0), UL=(9e9, 0.5))}
    assert reward(1, 0, budgets, 0.01) == 0.0
    assert reward(2, 0, budgets, 0.01) == pytest.approx(1.0e4)
    both = {(3, 0): family_budgets(UA=(1.0e4, 0.0), RF=(3.0e5, 0.001))}
    assert reward(3, 0, both, 0.01) == 3.0e5


def test_mean_capacity_threshold():
    budgets = {(5, 0): family_budgets(RF=(2.0e6, 0.0)), (5, 1): family_budgets(UA=(4.0e6, 0.0))}
    assert mean_capacity_threshold(5, [0], budgets) == pytest.approx(2.0e6)
    assert mean_capacity_threshold(5, [0, 1], budgets) == pytest.approx(3.0e6)
    same = {(5, 0): family_budgets(UL=(7.0e6, 0.0)), (5, 1): family_budgets(UL=(7.0e6, 0.0))}
    assert mean_capacity_threshold(5, [0, 1], same) == pytest.approx(7.0e6)
    with pytest.raises(EmptyRelaySet):
        mean_capacity_threshold(5, [], budgets)


@pytest.fixture
def four_nodes(make_scenario):
    return make_scenario([(10.0, 10.0, -5.0), (30.0, 10.0, -5.0),
                          (12.0, 12.0, -20.0), (40.0, 40.0, -30.0)])


@pytest.fixture
def hand_budgets():
    return {
        (2, 0): family_budgets(UA=(8.0e6, 0.0)),
        (2, 1): family_budgets(UA=(2.0e6, 0.0)),
        (3, 0): family_budgets(UA=(3.0e6, 0.0)),
        (3, 1): family_budgets(UA=(3.0e6, 0.0)),
    }


def test_gate_against_mean_capacity(four_nodes, hand_budgets):
    assignment = partition_erm(four_nodes, (0, 1), {2: 0, 3: 0}, budgets=hand_budgets)
    assert assignment.set_a == (0, 1)
    assert list(assignment.set_b) == [2]
    assert assignment.set_b[2][0] == 0
    assert assignment.set_b[2][1].capacity == pytest.approx(8.0e6)
    # equal to the mean is not enough
    assert assignment.set_c == (3,)

    assert [assignment.mode(i) for i in range(4)] == [1, 1, 2, 3]
    assert assignment.phi(0) == 1 and assignment.phi(2) == 0
    assert assignment.beta(2, 0) == 1 and assignment.beta(2, 1) == 0
    assert assignment.relay_of(2) == 0 and assignment.relay_of(3) is None
    with pytest.raises(KeyError):
        assignment.mode(99)


def test_weak_choice_is_isolated(four_nodes, hand_budgets):
    assignment = partition_erm(four_nodes, (0, 1), {2: 1, 3: 1}, budgets=hand_budgets)
    assert assignment.set_b == {}
    assert assignment.set_c == (2, 3)


def test_everyone_a_relay(four_nodes):
    assignment = partition_erm(four_nodes, (0, 1, 2, 3), {})
    assert assignment.set_b == {} and assignment.set_c == ()


def test_missing_relay_choice(four_nodes, hand_budgets):
    with pytest.raises(ValueError, match="no relay choice"):
        partition_erm(four_nodes, (0, 1), {2: 0}, budgets=hand_budgets)


def test_partition_matches_exhaustive_gate():
    s = generate_scenario(ScenarioConfig(n_usns=10, box=Box(120.0, 120.0, 60.0)), seed=5)
    eps = s.channel.epsilon
    relays, direct = detect_relays(s)
    others = [i for i in s.node_ids if i not in relays]
    budgets = relay_budgets(s, others, relays)
    choice = {i: max(relays, key=lambda k: (reward(i, k, budgets, eps), -k))
              for i in others} if relays else {}

    assignment = partition_erm(s, relays, choice, budgets, direct)

    expected_b = set()
    for i in others:
        if not relays:
            continue
        caps = []
        for k in relays:
            usable = [b.capacity for b in budgets[(i, k)].values() if b.outage <= eps]
            caps.append(max(usable) if usable else 0.0)
        mean = sum(caps) / len(caps)
        if any(b.outage <= eps and b.capacity > mean for b in budgets[(i, choice[i])].values()):
            expected_b.add(i)
    assert set(assignment.set_b) == expected_b
    assert set(assignment.set_c) == set(others) - expected_b
    assert assignment.violations(s.node_ids) == []


def test_violations_reported():
    b = family_budgets(UA=(1.0, 0.0))[LinkKind.UA]
    broken = ErmAssignment(set_a=(0,), set_b={1: (2, b)}, set_c=(1,))
    problems = broken.violations([0, 1, 2])
    assert "sets overlap" in problems
    assert "sets do not cover every node" in problems
    assert "node 1: relay 2 is not in A" in problems


def test_single_relay_on_default_scenario():
    s = generate_scenario(ScenarioConfig(), seed=7)
    relays, _ = detect_relays(s)
    assert len(relays) == 1
    assignment, _, budgets = select_erm(s, methods=())
    assert assignment.sizes == (1, 0, len(s.usns) - 1)
    k = relays[0]
    for i in assignment.set_c:
        threshold = mean_capacity_threshold(i, relays, budgets, s.channel.epsilon)
        assert threshold == reward(i, k, budgets, s.channel.epsilon)


def test_relays_ignore_node_order():
    rng = np.random.default_rng(4)
    for seed in range(5):
        s = generate_scenario(ScenarioConfig(n_usns=30), seed=seed)
        positions = [(u.pos.x, u.pos.y, u.pos.z) for u in s.usns]
        order = rng.permutation(len(positions))
        shuffled = build_scenario([positions[j] for j in order], seed=seed)
        relays, _ = detect_relays(s)
        moved, _ = detect_relays(shuffled)
        assert sorted(int(order[j]) for j in moved) == list(relays)


def test_relaxed_gates_keep_every_relay():
    for seed in range(5):
        s = generate_scenario(ScenarioConfig(n_usns=40), seed=seed)
        found = {}
        for gamma in (10.0, 1.0, 0.1, 0.01):
            for eps in (0.001, 0.005, 0.01, 0.05, 0.2):
                relaxed = replace(s, channel=replace(s.channel, gamma=gamma, epsilon=eps))
                found[(gamma, eps)] = set(detect_relays(relaxed)[0])
        for (g1, e1), strict in found.items():
            for (g2, e2), loose in found.items():
                if g2 <= g1 and e2 >= e1:
                    assert strict <= loose


def test_partition_is_complete_on_random_scenarios():
    for seed in range(8):
        s = generate_scenario(ScenarioConfig(n_usns=25, box=Box(200.0, 200.0, 80.0)), seed=seed)
        assignment, _, _ = select_erm(s, methods=())
        assert assignment.violations(s.node_ids) == []
        assert sum(assignment.sizes) == len(s.usns)
