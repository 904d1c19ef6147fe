"""Event-driven simulation of the partition flow.

A Poisson stream of non-trivial event partitions on {0,...,n} is the
common randomness behind three objects: the backward (coalescent) state,
obtained by folding events as ``state <- coag(state, event)``; the
forward population state, folding as ``state <- coag(event, state)``;
and the window partitions over (s, t].  Both folds start from singletons
and only ever coagulate, so block counts are non-increasing along either
direction of a fixed event log.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np

from .measures import CoagulationMeasure, EventSampler
from .partitions import DistinguishedPartition, coag, restrict, singletons

__all__ = [
    "EventLog",
    "Trajectory",
    "simulate_events",
    "backward_state",
    "forward_state",
    "window_partition",
    "backward_trajectory",
    "forward_trajectory",
    "absorption_time",
    "sample_fixation_time",
]

Direction = Literal["backward", "forward"]


@dataclass(frozen=True)
class EventLog:
    """Time-ordered non-trivial events (t_i, pi_i) on a finite window."""

    n: int
    horizon: float
    times: tuple[float, ...]
    marks: tuple[DistinguishedPartition, ...]
    seed_record: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.times) != len(self.marks):
            raise ValueError("times and marks must align")
        if any(t2 <= t1 for t1, t2 in zip(self.times, self.times[1:])):
            raise ValueError("event times must be strictly increasing")
        if self.times and not 0.0 < self.times[0] <= self.horizon >= self.times[-1]:
            raise ValueError("event times must lie in (0, horizon]")

    def __len__(self) -> int:
        return len(self.times)

    def events_in(self, s: float, t: float) -> Iterable[DistinguishedPartition]:
        """Marks with time in (s, t], in increasing time order."""
        lo = bisect.bisect_right(self.times, s)
        hi = bisect.bisect_right(self.times, t)
        return self.marks[lo:hi]

    def restricted(self, m: int) -> "EventLog":
        """The log of the same randomness at the coarser resolution m.

        Restricted marks that become trivial are dropped; this matches the
        thinning of the underlying Poisson measure.
        """
        times = []
        marks = []
        for t, pi in zip(self.times, self.marks):
            r = restrict(pi, m)
            if not r.is_singletons:
                times.append(t)
                marks.append(r)
        return EventLog(m, self.horizon, tuple(times), tuple(marks), self.seed_record)


def simulate_events(
    measure: CoagulationMeasure,
    n: int,
    horizon: float,
    rng: np.random.Generator,
    seed_record: tuple[int, ...] = (),
) -> EventLog:
    """Draw the Poisson event stream on (0, horizon] at resolution n."""
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    sampler = EventSampler(measure, n)
    times: list[float] = []
    marks: list[DistinguishedPartition] = []
    if sampler.total > 0.0:
        t = 0.0
        while True:
            dt, mark = sampler.next_event(rng)
            t += dt
            if t > horizon:
                break
            times.append(t)
            marks.append(mark)
    return EventLog(n, horizon, tuple(times), tuple(marks), seed_record)


def _fold(
    start: DistinguishedPartition,
    marks: Iterable[DistinguishedPartition],
    direction: Direction,
) -> DistinguishedPartition:
    state = start
    if direction == "backward":
        for pi in marks:
            state = coag(state, pi)
    elif direction == "forward":
        for pi in marks:
            state = coag(pi, state)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return state


def backward_state(log: EventLog, t: float) -> DistinguishedPartition:
    """Coalescent state at time t: left fold of the events up to t."""
    return window_partition(log, 0.0, t, "backward")


def forward_state(log: EventLog, t: float) -> DistinguishedPartition:
    """Population state at time t: fold with each new event first."""
    return window_partition(log, 0.0, t, "forward")


def window_partition(
    log: EventLog, s: float, t: float, direction: Direction = "backward"
) -> DistinguishedPartition:
    """Fold restricted to events in (s, t]."""
    if not 0.0 <= s <= t <= log.horizon:
        raise ValueError("need 0 <= s <= t <= horizon")
    return _fold(singletons(log.n), log.events_in(s, t), direction)


@dataclass(frozen=True)
class Trajectory:
    """Right-continuous piecewise-constant partition path on [0, horizon]."""

    horizon: float
    jump_times: tuple[float, ...]
    states: tuple[DistinguishedPartition, ...]  # state right after each jump
    initial: DistinguishedPartition

    def state_at(self, t: float) -> DistinguishedPartition:
        if not 0.0 <= t <= self.horizon:
            raise ValueError("time outside the window")
        k = bisect.bisect_right(self.jump_times, t)
        return self.initial if k == 0 else self.states[k - 1]

    def block_counts(self) -> tuple[int, ...]:
        return (self.initial.num_blocks,) + tuple(s.num_blocks for s in self.states)


def _trajectory(log: EventLog, direction: Direction) -> Trajectory:
    start = singletons(log.n)
    states = []
    state = start
    for pi in log.marks:
        state = coag(state, pi) if direction == "backward" else coag(pi, state)
        states.append(state)
    return Trajectory(log.horizon, log.times, tuple(states), start)


def backward_trajectory(log: EventLog) -> Trajectory:
    return _trajectory(log, "backward")


def forward_trajectory(log: EventLog) -> Trajectory:
    return _trajectory(log, "forward")


def absorption_time(log: EventLog, direction: Direction = "backward") -> float | None:
    """First event time with a single block; None if censored by the horizon."""
    traj = _trajectory(log, direction)
    for t, state in zip(traj.jump_times, traj.states):
        if state.is_single_block:
            return t
    return None


def sample_fixation_time(
    measure: CoagulationMeasure,
    n: int,
    rng: np.random.Generator,
    time_cap: float = 1e6,
    samplers: dict[int, EventSampler] | None = None,
) -> float | None:
    """Draw the absorption time of the coalescent on {0,...,n}.

    Simulates the block-count chain directly: with b+1 blocks the state
    changes exactly when the event restricted to the block indices
    {0,...,b} is non-trivial, which happens at the resolution-b total rate
    and leaves the block count of that restricted mark.  Restriction
    consistency of the rates makes this equal in law to folding a full
    event log, at a fraction of the cost.  Returns None when the cap is
    hit (censored) or when no event can ever absorb the state.
    """
    if samplers is None:
        samplers = {}
    blocks = n + 1
    t = 0.0
    while blocks > 1:
        b = blocks - 1
        sampler = samplers.get(b)
        if sampler is None:
            sampler = samplers[b] = EventSampler(measure, b)
        if sampler.total <= 0.0:
            return None
        t += rng.exponential(1.0 / sampler.total)
        if t > time_cap:
            return None
        blocks = sampler.next_block_count(rng)
    return t
