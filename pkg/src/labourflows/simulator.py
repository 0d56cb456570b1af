"""
Synthetic panels from a known generator.

Individuals follow a continuous-time Markov chain simulated exactly
(exponential holding times, embedded jump chain) and are recorded only at
period boundaries, which is what a quarterly survey sees.

Individuals are simulated in fixed-size blocks, each with its own RNG
stream spawned from the seed, so the output does not depend on how the
blocks are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import GeneratorMatrix, PanelDataset, ShareVector

__all__ = ["SimulationSpec", "sample_trajectory", "advance_states", "simulate_panel", "period_labels"]

BLOCK_SIZE = 8192


def _jump_table(Q: GeneratorMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Exit rates and cumulative jump probabilities per origin state."""
    A = np.asarray(Q.entries)
    rates = -np.diag(A).copy()
    rates[rates < 0] = 0.0
    jump = np.where(np.eye(A.shape[0], dtype=bool), 0.0, A)
    with np.errstate(invalid="ignore", divide="ignore"):
        jump = np.where(rates[:, None] > 0, jump / rates[:, None], 0.0)
    cum = np.cumsum(jump, axis=1)
    cum[:, -1] = np.where(rates > 0, 1.0, cum[:, -1])
    return rates, cum


def sample_trajectory(Q: GeneratorMatrix, state0, duration: float, rng: np.random.Generator,
                      return_events: bool = False):
    """Simulate one path of the chain for `duration` and return the end state.

    With ``return_events=True`` also return the jump log as a list of
    ``(time, new_state)`` pairs.
    """
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    if not isinstance(Q, GeneratorMatrix):
        Q = GeneratorMatrix(Q)
    rates, cum = _jump_table(Q)
    s = Q.space.resolve(state0)
    t = 0.0
    events = []
    while rates[s] > 0:
        t += rng.exponential(1.0 / rates[s])
        if t >= duration:
            break
        s = int(np.searchsorted(cum[s], rng.random(), side="right"))
        events.append((t, s))
    return (s, events) if return_events else s


def advance_states(states: np.ndarray, Q: GeneratorMatrix, duration: float,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Advance many independent chains by `duration` at once.

    Returns the end states and the number of jumps each chain made.
    """
    rates, cum = _jump_table(Q)
    s = np.array(states, dtype=np.int64)
    n = s.size
    remaining = np.full(n, float(duration))
    jumps = np.zeros(n, dtype=np.int64)
    active = np.flatnonzero(rates[s] > 0)
    while active.size:
        hold = rng.exponential(1.0, size=active.size) / rates[s[active]]
        moves = hold < remaining[active]
        active = active[moves]
        if not active.size:
            break
        remaining[active] -= hold[moves]
        u = rng.random(active.size)
        s[active] = (u[:, None] >= cum[s[active]]).sum(axis=1)
        jumps[active] += 1
        active = active[rates[s[active]] > 0]
    return s, jumps


def period_labels(n_periods: int) -> tuple[str, ...]:
    return tuple(f"P{t:03d}" for t in range(n_periods))


@dataclass(frozen=True, eq=False)
class SimulationSpec:
    """What to simulate.

    `Q_schedule` is one generator, or a cycle of generators applied to
    successive periods (period t uses ``Q_schedule[t % len(Q_schedule)]``).
    """

    Q_schedule: GeneratorMatrix | Sequence[GeneratorMatrix]
    n_individuals: int
    n_periods: int
    initial_distribution: ShareVector
    seed: int = 0
    periods: tuple | None = None

    def __post_init__(self):
        sched = self.Q_schedule
        if isinstance(sched, GeneratorMatrix):
            sched = (sched,)
        sched = tuple(Q if isinstance(Q, GeneratorMatrix) else GeneratorMatrix(Q) for Q in sched)
        if not sched:
            raise ValueError("empty generator schedule")
        space = sched[0].space
        if any(Q.space != space for Q in sched):
            raise ValueError("all scheduled generators must share a state space")
        if self.n_individuals < 1:
            raise ValueError("n_individuals must be at least 1")
        if self.n_periods < 2:
            raise ValueError("n_periods must be at least 2")
        init = self.initial_distribution
        if not isinstance(init, ShareVector):
            init = ShareVector(init, space)
        if init.space.K != space.K:
            raise ValueError("initial distribution does not match the state space")
        periods = self.periods if self.periods is not None else period_labels(self.n_periods)
        if len(periods) != self.n_periods:
            raise ValueError("need one period label per period")
        object.__setattr__(self, "Q_schedule", sched)
        object.__setattr__(self, "initial_distribution", init)
        object.__setattr__(self, "periods", tuple(periods))

    @property
    def space(self):
        return self.Q_schedule[0].space

    def generator_for(self, t: int) -> GeneratorMatrix:
        return self.Q_schedule[t % len(self.Q_schedule)]


def simulate_panel(spec: SimulationSpec, return_jumps: bool = False):
    """Simulate a balanced panel observed at every period boundary.

    With ``return_jumps=True`` also return an ``(n_individuals, n_periods - 1)``
    array with the number of jumps each individual made within each period.
    """
    n, T = spec.n_individuals, spec.n_periods
    K = spec.space.K
    states = np.empty((n, T), dtype=np.int64)
    jumps = np.zeros((n, T - 1), dtype=np.int64)
    n_blocks = -(-n // BLOCK_SIZE)
    streams = np.random.SeedSequence(spec.seed).spawn(n_blocks)
    p0 = np.asarray(spec.initial_distribution.shares)
    for b, ss in enumerate(streams):
        rng = np.random.Generator(np.random.PCG64(ss))
        lo, hi = b * BLOCK_SIZE, min(n, (b + 1) * BLOCK_SIZE)
        s = rng.choice(K, size=hi - lo, p=p0 / p0.sum())
        states[lo:hi, 0] = s
        for t in range(T - 1):
            s, nj = advance_states(s, spec.generator_for(t), 1.0, rng)
            states[lo:hi, t + 1] = s
            jumps[lo:hi, t] = nj
    width = len(str(n - 1))
    ids = tuple(f"i{k:0{width}d}" for k in range(n))
    panel = PanelDataset(spec.space, ids, spec.periods, states)
    return (panel, jumps) if return_jumps else panel
