"""
Deep Q relay selection with experience replay.

The Q-network is a small torch MLP (two tanh hidden layers) over the
stacked window of the last N states. There is no target network; a parameter
that turns non-finite aborts training with DivergedParameters.
"""
import logging
import math
from collections import deque
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

import config
from agent import RLHyper, TraceRecord, TrainingResult, epsilon_greedy
from errors import DivergedParameters, EmptyRelaySet
from relay_env import RelayEnv
from utils import make_rng

logger = logging.getLogger(__name__)


def features(observation: np.ndarray) -> np.ndarray:
    """Outages as-is, capacities as log10(1 + R) / 10."""
    out = np.array(observation, dtype=float)
    out[3:] = np.log10(1.0 + out[3:]) / 10.0
    return out


class ReplayBuffer:
    """FIFO transition memory with uniform sampling."""

    def __init__(self, capacity: int = config.REPLAY_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.memory: deque = deque(maxlen=capacity)

    def push(self, state: np.ndarray, action: int, reward: float, next_state: np.ndarray):
        self.memory.append((state, action, reward, next_state))

    def sample(self, batch_size: int, rng: np.random.Generator
               ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        idx = rng.integers(len(self.memory), size=batch_size)
        batch = [self.memory[i] for i in idx]
        states = np.stack([b[0] for b in batch])
        actions = np.array([b[1] for b in batch], dtype=int)
        rewards = np.array([b[2] for b in batch], dtype=float)
        next_states = np.stack([b[3] for b in batch])
        return states, actions, rewards, next_states

    def __len__(self) -> int:
        return len(self.memory)


class QNet(nn.Module):
    """
    Fully connected Q approximator: input -> tanh -> tanh -> linear(|A|),
    in float64, trained by plain SGD on the mean squared TD error.
    """

    def __init__(self, n_inputs: int, n_actions: int,
                 hidden: Sequence[int] = config.DQN_HIDDEN,
                 learning_rate: float = config.DQN_LEARNING_RATE,
                 seed: int = 0):
        super().__init__()
        sizes = [n_inputs] + list(hidden)
        layers: List[nn.Module] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            layers += [nn.Linear(fan_in, fan_out), nn.Tanh()]
        layers.append(nn.Linear(sizes[-1], n_actions))
        self.body = nn.Sequential(*layers).double()

        generator = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for layer in self.body:
                if isinstance(layer, nn.Linear):
                    layer.weight.normal_(0.0, 1.0 / math.sqrt(layer.in_features), generator=generator)
                    layer.bias.zero_()

        self.n_actions = n_actions
        self.optimizer = torch.optim.SGD(self.parameters(), lr=learning_rate)
        self.criterion = nn.MSELoss()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.body(x)

    def _td_loss(self, states: np.ndarray, actions: np.ndarray, targets: np.ndarray) -> torch.Tensor:
        x = torch.as_tensor(np.atleast_2d(states), dtype=torch.float64)
        a = torch.as_tensor(np.asarray(actions), dtype=torch.long)
        t = torch.as_tensor(np.asarray(targets), dtype=torch.float64)
        q = self(x).gather(1, a.unsqueeze(1)).squeeze(1)
        return self.criterion(q, t)

    def predict(self, states: np.ndarray) -> np.ndarray:
        """Q-values, shape (batch, |A|)."""
        with torch.no_grad():
            return self(torch.as_tensor(np.atleast_2d(states), dtype=torch.float64)).numpy()

    def q_values(self, state: np.ndarray) -> np.ndarray:
        return self.predict(state)[0]

    def loss(self, states: np.ndarray, actions: np.ndarray, targets: np.ndarray) -> float:
        """Mean squared TD error with the targets held fixed."""
        with torch.no_grad():
            return float(self._td_loss(states, actions, targets))

    def gradient(self, states: np.ndarray, actions: np.ndarray,
                 targets: np.ndarray) -> List[np.ndarray]:
        """Gradient of `loss` for every parameter, in `parameters()` order."""
        self.optimizer.zero_grad()
        self._td_loss(states, actions, targets).backward()
        return [p.grad.detach().numpy().copy() for p in self.parameters()]

    def train_step(self, states: np.ndarray, actions: np.ndarray, targets: np.ndarray) -> float:
        """One gradient-descent step; returns the loss before the step."""
        self.optimizer.zero_grad()
        loss = self._td_loss(states, actions, targets)
        loss.backward()
        self.optimizer.step()
        if not all(bool(torch.isfinite(p).all()) for p in self.parameters()):
            raise DivergedParameters("non-finite Q-network parameter")
        return float(loss.detach())


def train_dqn(env: RelayEnv, episodes: int = config.DQN_EPISODES,
              epochs: int = config.RL_EPOCHS, hyper: Optional[RLHyper] = None,
              seed: int = 0) -> TrainingResult:
    """
    DQN relay selection with uniform replay sampling.

    Rewards are scaled by the environment's largest observable capacity.
    The returned relay is the greedy action of the trained net averaged over
    the distinct states seen in replay.

    Raises:
        EmptyRelaySet: no relays
        DivergedParameters: a parameter became non-finite
    """
    hyper = hyper or RLHyper()
    n_actions = env.get_action_space_size()
    if n_actions == 0:
        raise EmptyRelaySet(f"node {env.node_id}: no relays to choose from")
    if n_actions == 1:
        return TrainingResult("dqn", env.node_id, env.relays[0], env.reward_max)

    rng = make_rng(seed, "dqn", env.node_id)
    env.epochs = epochs
    window = max(1, hyper.window)
    net = QNet(env.get_observation_space_size() * window, n_actions,
               hyper.hidden, hyper.learning_rate, seed=int(rng.integers(2 ** 31)))
    buffer = ReplayBuffer(hyper.replay_capacity)
    scale = env.reward_scale
    trace: List[TraceRecord] = []

    for episode in range(episodes):
        obs = env.reset(rng)
        history = deque([features(obs)] * window, maxlen=window)
        phi = np.concatenate(list(history))
        episode_reward = 0.0
        steps = 0
        done = False

        while not done:
            action = epsilon_greedy(net.q_values(phi), hyper.ell, rng)
            next_obs, r, done, info = env.step(action)
            history.append(features(next_obs))
            next_phi = np.concatenate(list(history))
            buffer.push(phi, action, r / scale, next_phi)

            if len(buffer) >= hyper.minibatch:
                states, actions, rewards, next_states = buffer.sample(hyper.minibatch, rng)
                targets = rewards + hyper.beta * net.predict(next_states).max(axis=1)
                net.train_step(states, actions, targets)

            phi = next_phi
            episode_reward += r
            steps += 1

        trace.append(TraceRecord(episode, episode_reward / steps,
                                 env.relays[_greedy(net, buffer)]))

    best = _greedy(net, buffer)
    logger.debug("dqn node %d: relay %d", env.node_id, env.relays[best])
    return TrainingResult("dqn", env.node_id, env.relays[best], float(env.rewards[best]), trace)


def _greedy(net: QNet, buffer: ReplayBuffer) -> int:
    seen = np.unique(np.stack([t[3] for t in buffer.memory]), axis=0)
    return int(np.argmax(net.predict(seen).mean(axis=0)))
