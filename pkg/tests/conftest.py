from __future__ import annotations

import pytest

from council.trajectory import Action, Observation, Step, Trajectory


def make_trajectory(pairs: list[tuple[str, str]], pending: str | None = None) -> Trajectory:
    steps = tuple(Step(Observation(o), Action(a)) for o, a in pairs)
    return Trajectory(steps=steps, pending=Observation(pending) if pending is not None else None)


@pytest.fixture
def traj():
    return make_trajectory
