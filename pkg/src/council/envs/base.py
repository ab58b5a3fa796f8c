"""Environment contract.

State is never threaded through the planner. The single reconstruction
mechanism is :meth:`Environment.replay`: hand the environment a task and the
full action list and it recomputes everything from scratch. That keeps every
node in a search tree a pure function of (task, actions) and makes traces
trivially reproducible.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any

from ..errors import InvalidStateError
from ..trajectory import Observation


@dataclass(frozen=True)
class TaskSpec:
    """One task instance: which environment, plus its env-specific payload."""

    task_id: str
    environment: str
    payload: Any


@dataclass
class StepOutcome:
    """The environment's response to one action.

    ``reward`` is present exactly when ``terminal`` is true. An invalid
    action never terminates anything: it leaves the underlying state where it
    was and reports a rejection observation.
    """

    observation: Observation
    terminal: bool
    reward: float | None = None
    invalid: bool = False

    def __post_init__(self) -> None:
        if self.terminal and self.reward is None:
            raise ValueError("terminal outcomes must carry a reward")
        if not self.terminal and self.reward is not None:
            raise ValueError("non-terminal outcomes must not carry a reward")


@dataclass(frozen=True)
class DiscountConfig:
    """Discount settings for future multi-reward environments.

    The bundled environments pay a single terminal reward, so ``gamma`` is
    carried in configuration but never enters any current computation.
    """

    gamma: float = 1.0


@dataclass
class ReplayResult:
    """Everything replay reconstructs: final state, the outcome of every
    action in order, and the current observation."""

    state: Any
    observation: Observation
    outcomes: list[StepOutcome] = field(default_factory=list)
    terminal: bool = False
    reward: float | None = None


class Environment(ABC):
    name: str = ""

    @abstractmethod
    def initial(self, task: TaskSpec) -> tuple[Any, Observation]:
        """Fresh state and the observation presenting the task."""

    @abstractmethod
    def apply(self, task: TaskSpec, state: Any, action: str) -> tuple[Any, StepOutcome]:
        """Apply one action. Must not mutate ``state``; returns the new one."""

    def replay(self, task: TaskSpec, actions: list[str]) -> ReplayResult:
        """Reconstruct the state after ``actions``, validating along the way.

        An empty action list reproduces the initial observation. Replaying an
        action after a terminal outcome is a caller bug and raises
        InvalidStateError.
        """
        state, observation = self.initial(task)
        result = ReplayResult(state=state, observation=observation)
        for position, action in enumerate(actions):
            if result.terminal:
                raise InvalidStateError(
                    f"action at position {position} follows a terminal outcome"
                )
            state, outcome = self.apply(task, result.state, action)
            result.state = state
            result.observation = outcome.observation
            result.outcomes.append(outcome)
            result.terminal = outcome.terminal
            result.reward = outcome.reward
        return result
