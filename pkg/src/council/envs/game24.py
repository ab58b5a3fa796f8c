"""The 24 game: combine four numbers with +, -, *, / to reach exactly 24.

Actions are single binary operations written as "a op b = c", for example
"10*10=100". Both operands must be present in the current number multiset
(matched within 1e-6); they are consumed and the result is added, so each
action shrinks the multiset by one. The episode is terminal when one number
remains, rewarded 1.0 when that number is 24 within 1e-6.

Two independent solvability checks live here. ``game24_oracle`` searches the
same move space as the environment (recursive pair reduction) and returns a
replayable witness. ``solvable_by_expressions`` enumerates expression shapes
(operand permutations, operator choices, five bracketings) and never builds
actions at all. They exist to check each other.
"""

from __future__ import annotations

import re
from functools import lru_cache
from typing import Iterable, Sequence

from ..errors import InvalidStateError
from ..seeding import derived_rng
from ..trajectory import Observation
from .base import Environment, StepOutcome, TaskSpec

TARGET = 24.0
MATCH_TOL = 1e-6
RESULT_TOL = 1e-4
DIV_EPS = 1e-9

_ACTION_RE = re.compile(
    r"^\s*(-?\d+(?:\.\d+)?)\s*([-+*/x×÷−])\s*(-?\d+(?:\.\d+)?)\s*=\s*(-?\d+(?:\.\d+)?)\s*$"
)

_OP_CANON = {"+": "+", "-": "-", "−": "-", "*": "*", "x": "*", "×": "*", "/": "/", "÷": "/"}


def format_number(x: float) -> str:
    if abs(x - round(x)) < 1e-9:
        return str(int(round(x)))
    return format(x, ".10g")


def format_numbers(numbers: Iterable[float]) -> str:
    return " ".join(format_number(x) for x in sorted(numbers))


def _observation(numbers: Sequence[float], note: str = "") -> Observation:
    body = f"numbers: {format_numbers(numbers)}"
    if note:
        body = f"{note}; {body}"
    return Observation(body)


def parse_numbers(observation_text: str) -> tuple[float, ...] | None:
    """Pull the current multiset back out of an observation's text."""
    match = re.search(r"numbers: ([-\d. ]*)", observation_text)
    if match is None:
        return None
    fields = match.group(1).split()
    try:
        return tuple(float(f) for f in fields)
    except ValueError:
        return None


def _apply_op(a: float, op: str, b: float) -> float | None:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if abs(b) < DIV_EPS:
        return None
    return a / b


def _take(numbers: Sequence[float], value: float) -> list[float] | None:
    """Remove one element matching ``value`` within tolerance, or None."""
    remaining = list(numbers)
    for i, x in enumerate(remaining):
        if abs(x - value) <= MATCH_TOL:
            del remaining[i]
            return remaining
    return None


def game24_step(numbers: Sequence[float], action: str) -> tuple[tuple[float, ...], StepOutcome]:
    """Apply one combining action to the current multiset.

    Malformed actions, absent operands, division by (near) zero, and a stated
    result that disagrees with the actual arithmetic all reject the action:
    the multiset is unchanged and the outcome is flagged invalid.
    """
    numbers = tuple(numbers)
    if len(numbers) <= 1:
        raise InvalidStateError("no action is applicable to a terminal state")

    def reject(reason: str) -> tuple[tuple[float, ...], StepOutcome]:
        return numbers, StepOutcome(
            observation=_observation(numbers, f"invalid action ({reason})"),
            terminal=False,
            invalid=True,
        )

    match = _ACTION_RE.match(action)
    if match is None:
        return reject("expected 'a op b = c'")
    a = float(match.group(1))
    op = _OP_CANON[match.group(2)]
    b = float(match.group(3))
    stated = float(match.group(4))

    rest = _take(numbers, a)
    if rest is None:
        return reject(f"{format_number(a)} is not available")
    rest = _take(rest, b)
    if rest is None:
        return reject(f"{format_number(b)} is not available")
    value = _apply_op(a, op, b)
    if value is None:
        return reject("division by zero")
    if abs(value - stated) > RESULT_TOL:
        return reject(f"{format_number(a)}{op}{format_number(b)} is not {format_number(stated)}")

    new_numbers = tuple(rest + [value])
    if len(new_numbers) == 1:
        solved = abs(new_numbers[0] - TARGET) <= MATCH_TOL
        note = "solved" if solved else "failed"
        return new_numbers, StepOutcome(
            observation=_observation(new_numbers, note),
            terminal=True,
            reward=1.0 if solved else 0.0,
        )
    return new_numbers, StepOutcome(observation=_observation(new_numbers), terminal=False)


def legal_actions(numbers: Sequence[float]) -> list[str]:
    """Every applicable action from this multiset, in a canonical order."""
    out: list[str] = []
    seen: set[str] = set()
    items = sorted(numbers)
    for i in range(len(items)):
        for j in range(len(items)):
            if i == j:
                continue
            a, b = items[i], items[j]
            for op in "+-*/":
                if op in "+*" and j < i:
                    continue
                value = _apply_op(a, op, b)
                if value is None:
                    continue
                action = f"{format_number(a)}{op}{format_number(b)}={format_number(value)}"
                if action not in seen:
                    seen.add(action)
                    out.append(action)
    return out


# ---------------------------------------------------------------------------
# Solvability oracles
# ---------------------------------------------------------------------------


def _memo_key(numbers: Sequence[float]) -> tuple[float, ...]:
    return tuple(sorted(round(x, 9) for x in numbers))


@lru_cache(maxsize=200_000)
def _solve(key: tuple[float, ...]) -> tuple[str, ...] | None:
    numbers = list(key)
    if len(numbers) == 1:
        return () if abs(numbers[0] - TARGET) <= MATCH_TOL else None
    for i in range(len(numbers)):
        for j in range(len(numbers)):
            if i == j:
                continue
            a, b = numbers[i], numbers[j]
            rest = [numbers[t] for t in range(len(numbers)) if t not in (i, j)]
            for op in "+-*/":
                if op in "+*" and j < i:
                    continue
                value = _apply_op(a, op, b)
                if value is None:
                    continue
                tail = _solve(_memo_key(rest + [value]))
                if tail is not None:
                    action = f"{format_number(a)}{op}{format_number(b)}={format_number(value)}"
                    return (action,) + tail
    return None


def game24_oracle(numbers: Sequence[float]) -> tuple[bool, list[str] | None]:
    """Decide solvability by searching the environment's own move space.

    Returns (solvable, witness). The witness is a list of actions that
    replays through ``game24_step`` to a terminal reward of 1.0.
    """
    witness = _solve(_memo_key(numbers))
    if witness is None:
        return False, None
    return True, list(witness)


def solvable_by_expressions(numbers: Sequence[float]) -> bool:
    """Independent solvability check via expression-shape enumeration.

    Tries every operand permutation, operator triple, and the five ways of
    bracketing four operands. Shares no code path with the recursive oracle.
    """
    from itertools import permutations, product

    if len(numbers) != 4:
        raise ValueError("expression enumeration is defined for exactly four numbers")

    def combine(x: float | None, op: str, y: float | None) -> float | None:
        if x is None or y is None:
            return None
        return _apply_op(x, op, y)

    for a, b, c, d in set(permutations(numbers)):
        for o1, o2, o3 in product("+-*/", repeat=3):
            candidates = (
                combine(combine(combine(a, o1, b), o2, c), o3, d),
                combine(combine(a, o1, combine(b, o2, c)), o3, d),
                combine(combine(a, o1, b), o2, combine(c, o3, d)),
                combine(a, o1, combine(combine(b, o2, c), o3, d)),
                combine(a, o1, combine(b, o2, combine(c, o3, d))),
            )
            for value in candidates:
                if value is not None and abs(value - TARGET) <= MATCH_TOL:
                    return True
    return False


# ---------------------------------------------------------------------------
# Environment wrapper and task generation
# ---------------------------------------------------------------------------


class Game24Env(Environment):
    name = "game24"

    def initial(self, task: TaskSpec) -> tuple[tuple[float, ...], Observation]:
        numbers = tuple(float(x) for x in task.payload)
        if not numbers:
            raise ValueError("game24 payload must contain at least one number")
        if len(numbers) == 1:
            # Degenerate but well defined: nothing to combine.
            solved = abs(numbers[0] - TARGET) <= MATCH_TOL
            note = "solved" if solved else "failed"
            return numbers, _observation(numbers, note)
        return numbers, _observation(numbers, "make 24")

    def apply(
        self, task: TaskSpec, state: tuple[float, ...], action: str
    ) -> tuple[tuple[float, ...], StepOutcome]:
        return game24_step(state, action)

    def replay(self, task, actions):
        result = super().replay(task, actions)
        if not actions and len(result.state) == 1:
            result.terminal = True
            result.reward = 1.0 if abs(result.state[0] - TARGET) <= MATCH_TOL else 0.0
        return result


def make_game24_tasks(count: int, seed: int, low: int = 1, high: int = 13) -> list[TaskSpec]:
    """Sample ``count`` distinct solvable four-number tasks, deterministically."""
    rng = derived_rng("game24-tasks", seed)
    tasks: list[TaskSpec] = []
    seen: set[tuple[int, ...]] = set()
    while len(tasks) < count:
        combo = tuple(sorted(rng.randint(low, high) for _ in range(4)))
        if combo in seen:
            continue
        seen.add(combo)
        solvable, _ = game24_oracle(combo)
        if not solvable:
            continue
        name = "-".join(str(x) for x in combo)
        tasks.append(TaskSpec(task_id=f"g24-{name}", environment="game24", payload=list(combo)))
    return tasks
