"""
Tabular relay-selection agents (Q-learning and Sarsa), method comparison
and the nearest-relay baseline
"""
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import config
from entities import Scenario
from errors import DivergedParameters, EmptyRelaySet
from relay_env import PairBudgets, RelayEnv, discretize, reward
from utils import distance, make_rng

logger = logging.getLogger(__name__)

TABULAR_METHODS = ("qlearning", "sarsa")
# select_best prefers earlier methods on equal reward
METHOD_PRIORITY = {"qlearning": 0, "sarsa": 1, "dqn": 2}


@dataclass(frozen=True)
class RLHyper:
    alpha: float = config.RL_ALPHA
    beta: float = config.RL_BETA
    ell: float = config.RL_ELL
    episodes: int = config.RL_EPISODES
    epochs: int = config.RL_EPOCHS
    dqn_episodes: int = config.DQN_EPISODES
    window: int = config.DQN_WINDOW
    hidden: Tuple[int, ...] = config.DQN_HIDDEN
    learning_rate: float = config.DQN_LEARNING_RATE
    replay_capacity: int = config.REPLAY_CAPACITY
    minibatch: int = config.MINIBATCH_SIZE

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must be in [0, 1), got {self.beta}")
        if not 0.0 <= self.ell < 1.0:
            raise ValueError(f"ell must be in [0, 1), got {self.ell}")
        if self.episodes < 1 or self.epochs < 1 or self.dqn_episodes < 1:
            raise ValueError("episodes and epochs must be >= 1")
        if self.replay_capacity < self.minibatch:
            raise ValueError("replay capacity must be >= minibatch size")


@dataclass(frozen=True)
class TraceRecord:
    episode: int
    mean_reward: float
    relay: int


@dataclass
class TrainingResult:
    method: str
    node_id: int
    relay: int
    reward: float
    trace: List[TraceRecord] = field(default_factory=list)
    fallback: bool = False  # neural training diverged, tabular result used


# --- update rules ---

def epsilon_greedy(q_values: Sequence[float], ell: float, rng: np.random.Generator) -> int:
    """
    Greedy action with probability 1 - ell, else a uniformly random action.
    Ties go to the first index.
    """
    if rng.random() < ell:
        return int(rng.integers(len(q_values)))
    return int(np.argmax(q_values))


class QTable:
    """Q-values keyed by discretized state, one row per state."""

    def __init__(self, n_actions: int):
        self.n_actions = n_actions
        self.values: Dict[Tuple[int, ...], np.ndarray] = defaultdict(lambda: np.zeros(n_actions))

    def row(self, state) -> np.ndarray:
        return self.values[state]

    def max_abs(self) -> float:
        return max((float(np.abs(r).max()) for r in self.values.values()), default=0.0)

    def __len__(self) -> int:
        return len(self.values)


def q_update(Q: QTable, s_t, a_t: int, r_t: float, s_next, alpha: float, beta: float) -> float:
    """Off-policy update: (1-a)Q + a(r + b max Q(s', .))."""
    new_q = (1.0 - alpha) * Q.row(s_t)[a_t] + alpha * (r_t + beta * float(Q.row(s_next).max()))
    Q.row(s_t)[a_t] = new_q
    return new_q


def sarsa_update(Q: QTable, s_t, a_t: int, r_t: float, s_next, a_next: int,
                 alpha: float, beta: float) -> float:
    """On-policy update using the committed next action."""
    new_q = (1.0 - alpha) * Q.row(s_t)[a_t] + alpha * (r_t + beta * float(Q.row(s_next)[a_next]))
    Q.row(s_t)[a_t] = new_q
    return new_q


class QTableAgent:
    def __init__(self, n_actions: int, hyper: RLHyper, epsilon: float, on_policy: bool = False):
        """
        Args:
            n_actions: number of relays
            hyper: learning rate, discount and exploration rate
            epsilon: outage threshold used by the state discretization
            on_policy: Sarsa updates instead of Q-learning
        """
        self.qtable = QTable(n_actions)
        self.hyper = hyper
        self.epsilon = epsilon
        self.on_policy = on_policy
        self._keys: Dict[bytes, Tuple[int, ...]] = {}

        # Statistics
        self.episodes = 0
        self.visits: Counter = Counter()
        self.episode_rewards: List[float] = []

    def get_state(self, observation: np.ndarray) -> Tuple[int, ...]:
        raw = observation.tobytes()
        if raw not in self._keys:
            self._keys[raw] = discretize(observation, self.epsilon)
        return self._keys[raw]

    def choose_action(self, state, rng: np.random.Generator) -> int:
        return epsilon_greedy(self.qtable.row(state), self.hyper.ell, rng)

    def learn(self, state, action: int, r: float, next_state, next_action: int):
        self.visits[state] += 1
        if self.on_policy:
            sarsa_update(self.qtable, state, action, r, next_state, next_action,
                         self.hyper.alpha, self.hyper.beta)
        else:
            q_update(self.qtable, state, action, r, next_state,
                     self.hyper.alpha, self.hyper.beta)

    def end_episode(self, episode_reward: float):
        self.episodes += 1
        self.episode_rewards.append(episode_reward)

    def greedy_action(self) -> int:
        """Greedy action in the most visited state (first state on ties)."""
        if not self.visits:
            return 0
        state = max(self.visits, key=lambda s: self.visits[s])
        return int(np.argmax(self.qtable.row(state)))

    def get_stats(self) -> dict:
        if not self.episode_rewards:
            return {"episodes": 0, "qtable_size": 0, "avg_reward": 0.0, "best_reward": 0.0}
        return {
            "episodes": self.episodes,
            "qtable_size": len(self.qtable),
            "avg_reward": float(np.mean(self.episode_rewards)),
            "best_reward": max(self.episode_rewards),
        }


def _train_tabular(env: RelayEnv, method: str, episodes: int, epochs: int,
                   hyper: RLHyper, seed: int) -> TrainingResult:
    if env.get_action_space_size() == 0:
        raise EmptyRelaySet(f"node {env.node_id}: no relays to choose from")
    if env.get_action_space_size() == 1:
        return TrainingResult(method, env.node_id, env.relays[0], env.reward_max)

    rng = make_rng(seed, method, env.node_id)
    env.epochs = epochs
    agent = QTableAgent(env.get_action_space_size(), hyper, env.epsilon,
                        on_policy=(method == "sarsa"))
    q_bound = env.reward_max / (1.0 - hyper.beta)
    trace: List[TraceRecord] = []

    for episode in range(episodes):
        obs = env.reset(rng)
        state = agent.get_state(obs)
        action = agent.choose_action(state, rng)
        episode_reward = 0.0
        steps = 0
        done = False

        # Episodes end on the step limit only, so every update bootstraps
        while not done:
            next_obs, r, done, info = env.step(action)
            next_state = agent.get_state(next_obs)
            next_action = agent.choose_action(next_state, rng)
            agent.learn(state, action, r, next_state, next_action)

            state, action = next_state, next_action
            episode_reward += r
            steps += 1

        assert agent.qtable.max_abs() <= q_bound * (1.0 + 1e-9) + 1e-12, "Q-values left contraction bound"
        agent.end_episode(episode_reward)
        trace.append(TraceRecord(episode, episode_reward / steps, env.relays[agent.greedy_action()]))

    best = agent.greedy_action()
    stats = agent.get_stats()
    logger.debug("%s node %d: relay %d, %d states, avg episode reward %.3e",
                 method, env.node_id, env.relays[best], stats["qtable_size"], stats["avg_reward"])
    return TrainingResult(method, env.node_id, env.relays[best], float(env.rewards[best]), trace)


def train_qlearning(env: RelayEnv, episodes: int = config.RL_EPISODES,
                    epochs: int = config.RL_EPOCHS, hyper: Optional[RLHyper] = None,
                    seed: int = 0) -> TrainingResult:
    """
    Tabular Q-learning over relays.

    Returns:
        TrainingResult with the greedy relay and its reward
    """
    return _train_tabular(env, "qlearning", episodes, epochs, hyper or RLHyper(), seed)


def train_sarsa(env: RelayEnv, episodes: int = config.RL_EPISODES,
                epochs: int = config.RL_EPOCHS, hyper: Optional[RLHyper] = None,
                seed: int = 0) -> TrainingResult:
    """Tabular Sarsa over relays."""
    return _train_tabular(env, "sarsa", episodes, epochs, hyper or RLHyper(), seed)


def select_best(results: Sequence[TrainingResult]) -> TrainingResult:
    """Result with the highest reward; ties go to the tabular methods."""
    if not results:
        raise ValueError("no method results")
    return min(results, key=lambda r: (-r.reward, METHOD_PRIORITY.get(r.method, 99)))


def nearest_relay_baseline(s: Scenario, i: int, relays: Sequence[int],
                           budgets: PairBudgets) -> Tuple[int, float]:
    """Closest relay by Euclidean distance and its reward."""
    if not relays:
        raise EmptyRelaySet(f"node {i}: no relays")
    pos = s.usn(i).pos
    k = min(relays, key=lambda k: (distance(pos, s.usn(k).pos), k))
    return k, reward(i, k, budgets, s.channel.epsilon)


def select_relays(s: Scenario, relays: Sequence[int], budgets: PairBudgets,
                  methods: Sequence[str] = config.METHODS,
                  hyper: Optional[RLHyper] = None) -> Dict[int, Dict[str, TrainingResult]]:
    """
    Train every enabled method for every node outside the relay set.

    Returns:
        node id -> method -> TrainingResult
    """
    from dqn import train_dqn

    hyper = hyper or RLHyper()
    unknown = set(methods) - set(METHOD_PRIORITY)
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")
    relay_set = set(relays)
    learners = [u.id for u in s.usns if u.id not in relay_set]
    results: Dict[int, Dict[str, TrainingResult]] = {}

    for n, i in enumerate(learners):
        env = RelayEnv.from_budgets(i, relays, budgets, s.channel.epsilon, hyper.epochs)
        per_method: Dict[str, TrainingResult] = {}
        if "qlearning" in methods:
            per_method["qlearning"] = train_qlearning(env, hyper.episodes, hyper.epochs, hyper, s.seed)
        if "sarsa" in methods:
            per_method["sarsa"] = train_sarsa(env, hyper.episodes, hyper.epochs, hyper, s.seed)
        if "dqn" in methods:
            try:
                per_method["dqn"] = train_dqn(env, hyper.dqn_episodes, hyper.epochs, hyper, s.seed)
            except DivergedParameters as exc:
                logger.warning("node %d: DQN diverged (%s), using tabular result", i, exc)
                tabular = per_method.get("qlearning") or train_qlearning(
                    env, hyper.episodes, hyper.epochs, hyper, s.seed)
                per_method["dqn"] = TrainingResult("dqn", i, tabular.relay, tabular.reward,
                                                   tabular.trace, fallback=True)
        results[i] = per_method
        if (n + 1) % 10 == 0:
            logger.info("relay selection: %d/%d nodes trained", n + 1, len(learners))
    return results
