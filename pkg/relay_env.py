"""
Relay selection environment - RL ready
Provides a Gym-like interface (reset/step) for a node choosing its relay
"""
import logging
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

import config
from channel import LinkBudget
from entities import LinkKind, STATE_ORDER

logger = logging.getLogger(__name__)

# Per-pair budgets: (node id, relay id) -> one budget per link family
PairBudgets = Mapping[Tuple[int, int], Mapping[LinkKind, LinkBudget]]

CAPACITY_EDGES = np.logspace(np.log10(config.CAPACITY_BIN_RANGE[0]),
                             np.log10(config.CAPACITY_BIN_RANGE[1]),
                             config.CAPACITY_BINS - 1)


def reward(i: int, k: int, budgets: PairBudgets, epsilon: float) -> float:
    """
    Best capacity from node i to relay k over the link families not in outage.

    Returns:
        bits/s, 0 when every family is in outage
    """
    return max((b.capacity if b.outage <= epsilon else 0.0) for b in budgets[(i, k)].values())


def state_vector(link_budgets: Mapping[LinkKind, LinkBudget]) -> np.ndarray:
    """[outage UL, UA, RF, capacity UL, UA, RF]"""
    outages = [link_budgets[kind].outage for kind in STATE_ORDER]
    capacities = [link_budgets[kind].capacity for kind in STATE_ORDER]
    return np.array(outages + capacities, dtype=float)


def discretize(state: np.ndarray, epsilon: float) -> Tuple[int, ...]:
    """
    Q-table key for a state: outage as {<= eps, > eps}, capacity in
    log-spaced bins.
    """
    outage_bins = [0 if o <= epsilon else 1 for o in state[:3]]
    capacity_bins = [int(b) for b in np.digitize(state[3:], CAPACITY_EDGES)]
    return tuple(outage_bins + capacity_bins)


class RelayEnv:
    """
    One learner node choosing among the relays.

    State space: the 6-entry link state of the currently selected relay
        (outage and capacity for UL, UA, RF)

    Action space: Discrete (index into relays, 0-based)

    Reward: best non-outage capacity to the chosen relay (bits/s).
        The next state is the state induced by the chosen relay.
    """

    def __init__(self, node_id: int, relays: Sequence[int], states: np.ndarray,
                 rewards: Sequence[float], epsilon: float = config.EPSILON,
                 epochs: int = config.RL_EPOCHS):
        """
        Args:
            node_id: learner node
            relays: relay node ids, in action order
            states: (|relays|, 6) link states
            rewards: reward per relay
            epsilon: outage threshold
            epochs: steps per episode
        """
        states = np.asarray(states, dtype=float)
        if states.shape != (len(relays), 6):
            raise ValueError(f"states must have shape ({len(relays)}, 6), got {states.shape}")
        self.node_id = node_id
        self.relays = tuple(relays)
        self.states = states
        self.rewards = np.asarray(rewards, dtype=float)
        self.epsilon = epsilon
        self.epochs = epochs

        self.current = 0
        self.episode_step = 0

    @classmethod
    def from_budgets(cls, node_id: int, relays: Sequence[int], budgets: PairBudgets,
                     epsilon: float = config.EPSILON,
                     epochs: int = config.RL_EPOCHS) -> "RelayEnv":
        states = np.array([state_vector(budgets[(node_id, k)]) for k in relays])
        rewards = [reward(node_id, k, budgets, epsilon) for k in relays]
        return cls(node_id, relays, states, rewards, epsilon=epsilon, epochs=epochs)

    def reset(self, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """Start an episode at a random relay (relay 0 without an rng)."""
        self.current = int(rng.integers(len(self.relays))) if rng is not None else 0
        self.episode_step = 0
        return self.states[self.current].copy()

    def step(self, action: int) -> Tuple[np.ndarray, float, bool, Dict]:
        """
        Select relay `action`.

        Returns:
            (observation, reward, done, info)
        """
        if not 0 <= action < len(self.relays):
            raise ValueError(f"action {action} out of range")
        self.current = action
        self.episode_step += 1
        done = self.episode_step >= self.epochs
        info = {"relay": self.relays[action], "step": self.episode_step}
        return self.states[action].copy(), float(self.rewards[action]), done, info

    def get_observation_space_size(self) -> int:
        return 6

    def get_action_space_size(self) -> int:
        return len(self.relays)

    @property
    def reward_max(self) -> float:
        return float(self.rewards.max()) if len(self.rewards) else 0.0

    @property
    def reward_scale(self) -> float:
        """Largest capacity anywhere in the observation space (1 if none)."""
        top = float(self.states[:, 3:].max()) if len(self.states) else 0.0
        return top if top > 0 else 1.0

    def best_action(self) -> int:
        """Exhaustive argmax over relays (first index on ties)."""
        return int(np.argmax(self.rewards))
