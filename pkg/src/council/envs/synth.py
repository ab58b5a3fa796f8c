"""Synthetic specialization environment.

Each task hides a short token sequence drawn from one family's private
vocabulary. The agent must emit the hidden tokens in order; a wrong token at
the current position burns one attempt, and the attempt budget running out
ends the episode with reward 0. Completing the sequence pays 1.

Families exist to create genuine specialization: their vocabularies are
disjoint down to the character level, the opening observation lists the
task's vocabulary, and every numeral in an observation is written in the
family's own letter alphabet. Trajectory text therefore shares almost no
character n-grams across families, so profile similarities separate sharply.
An expert scripted around one family's oracle is competent exactly there and
nowhere else, and the environment is sized so that picking the right
specialist measurably beats picking one at random under a tight search
budget.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import product

from ..seeding import derived_rng, derived_seed
from ..trajectory import Observation
from .base import Environment, StepOutcome, TaskSpec

DEFAULT_FAMILIES = ("amber", "basalt", "cedar")

_SUFFIX_LETTERS = "abcdefghijklmnopqrstuvwx"
_LETTERS_PER_FAMILY = 8


@dataclass(frozen=True)
class SynthConfig:
    families: tuple[str, ...] = DEFAULT_FAMILIES
    depth: int = 3
    budget: int = 2
    vocab_size: int = 16

    def __post_init__(self) -> None:
        if self.depth < 1 or self.budget < 1 or self.vocab_size < 2:
            raise ValueError("synth environment needs depth >= 1, budget >= 1, vocab >= 2")
        if len(set(self.families)) != len(self.families) or not self.families:
            raise ValueError("family names must be non-empty and distinct")
        if len(self.families) > len(_SUFFIX_LETTERS) // _LETTERS_PER_FAMILY:
            raise ValueError("at most three families are supported")
        if self.vocab_size > _LETTERS_PER_FAMILY**2:
            raise ValueError(f"vocab_size cannot exceed {_LETTERS_PER_FAMILY ** 2}")


def family_letters(family: str, config: SynthConfig) -> str:
    """The alphabet slice reserved for the family."""
    index = config.families.index(family) if family in config.families else -1
    if index < 0:
        raise ValueError(f"unknown family: {family}")
    return _SUFFIX_LETTERS[index * _LETTERS_PER_FAMILY : (index + 1) * _LETTERS_PER_FAMILY]


def family_vocab(family: str, config: SynthConfig) -> list[str]:
    """The family's private tokens.

    Suffixes are letter pairs drawn from an alphabet slice reserved for the
    family, so different families share no trigrams even in their suffixes.
    """
    letters = family_letters(family, config)
    pairs = ("".join(pair) for pair in product(letters, repeat=2))
    return [f"{family}{suffix}" for suffix, _ in zip(pairs, range(config.vocab_size))]


def encode_count(value: int, letters: str) -> str:
    """Write a non-negative integer as base-8 numerals in family letters."""
    if value < 0:
        raise ValueError("counts cannot be negative")
    digits = []
    while True:
        digits.append(letters[value % _LETTERS_PER_FAMILY])
        value //= _LETTERS_PER_FAMILY
        if value == 0:
            return "".join(reversed(digits))


def decode_count(text: str, letters: str) -> int | None:
    """Inverse of encode_count; None when a character is outside the alphabet."""
    value = 0
    for ch in text:
        digit = letters.find(ch)
        if digit < 0:
            return None
        value = value * _LETTERS_PER_FAMILY + digit
    return value if text else None


def hidden_sequence(family: str, seed: int, config: SynthConfig) -> tuple[str, ...]:
    """The task's answer key, a pure function of (family, seed, config)."""
    vocab = family_vocab(family, config)
    rng = derived_rng("synth-hidden", family, seed, config.depth, config.vocab_size)
    return tuple(rng.choice(vocab) for _ in range(config.depth))


@dataclass(frozen=True)
class SynthView:
    """Parsed form of a synth observation, for scripted experts."""

    family: str
    seed: int
    done: int
    depth: int
    missed: int
    budget: int
    solved: bool
    failed: bool


def parse_view(observation_text: str, config: SynthConfig | None = None) -> SynthView | None:
    cfg = config if config is not None else SynthConfig()
    m = re.match(
        r"^\[([a-z]+)#([a-z]+)\] (go|ok|no|bad|win|lose)"
        r" \+([a-z]+)/([a-z]+)(?: ~([a-z]+)/([a-z]+))?(?:; .+)?$",
        observation_text,
    )
    if m is None or m.group(1) not in cfg.families:
        return None
    letters = family_letters(m.group(1), cfg)
    numerals = [decode_count(g, letters) if g else 0 for g in m.groups()[1:2] + m.groups()[3:]]
    if any(n is None for n in numerals):
        return None
    seed, done, depth, missed, budget = numerals
    status = m.group(3)
    return SynthView(
        family=m.group(1),
        seed=seed,
        done=done,
        depth=depth,
        missed=missed,
        budget=budget,
        solved=status == "win",
        failed=status == "lose",
    )


@dataclass(frozen=True)
class _State:
    done: int
    missed: int


class SynthEnv(Environment):
    name = "synth"

    def __init__(self, config: SynthConfig | None = None):
        self.config = config if config is not None else SynthConfig()

    def _letters(self, task: TaskSpec) -> str:
        return family_letters(task.payload["family"], self.config)

    def _tag(self, task: TaskSpec) -> str:
        seed = encode_count(task.payload["seed"], self._letters(task))
        return f"[{task.payload['family']}#{seed}]"

    def _status(self, task: TaskSpec, word: str, state: _State, counters: bool = True) -> str:
        # Numerals ride in the family's own letters; only the status word and
        # the punctuation are common text, keeping cross-family n-grams rare.
        cfg = self.config
        letters = self._letters(task)
        done = f"+{encode_count(state.done, letters)}/{encode_count(cfg.depth, letters)}"
        if not counters:
            return f"{self._tag(task)} {word} {done}"
        missed = f"~{encode_count(state.missed, letters)}/{encode_count(cfg.budget, letters)}"
        return f"{self._tag(task)} {word} {done} {missed}"

    def hidden(self, task: TaskSpec) -> tuple[str, ...]:
        return hidden_sequence(task.payload["family"], task.payload["seed"], self.config)

    def initial(self, task: TaskSpec) -> tuple[_State, Observation]:
        family = task.payload["family"]
        if family not in self.config.families:
            raise ValueError(f"unknown family: {family}")
        # The vocabulary doubles as the task's family signature for routing.
        vocab = " ".join(family_vocab(family, self.config))
        state = _State(done=0, missed=0)
        return state, Observation(f"{self._status(task, 'go', state)}; {vocab}")

    def apply(self, task: TaskSpec, state: _State, action: str) -> tuple[_State, StepOutcome]:
        cfg = self.config
        if not action.strip():
            return state, StepOutcome(
                observation=Observation(self._status(task, "bad", state)),
                terminal=False,
                invalid=True,
            )
        answer = self.hidden(task)
        if action == answer[state.done]:
            new = _State(done=state.done + 1, missed=0)
            if new.done == cfg.depth:
                return new, StepOutcome(
                    observation=Observation(self._status(task, "win", new, counters=False)),
                    terminal=True,
                    reward=1.0,
                )
            return new, StepOutcome(
                observation=Observation(self._status(task, "ok", new)),
                terminal=False,
            )
        new = _State(done=state.done, missed=state.missed + 1)
        if new.missed >= cfg.budget:
            return new, StepOutcome(
                observation=Observation(self._status(task, "lose", new, counters=False)),
                terminal=True,
                reward=0.0,
            )
        return new, StepOutcome(
            observation=Observation(self._status(task, "no", new)),
            terminal=False,
        )


def make_synth_tasks(
    count: int, seed: int, config: SynthConfig | None = None
) -> list[TaskSpec]:
    """Balanced task list cycling through families, deterministic in ``seed``."""
    cfg = config if config is not None else SynthConfig()
    tasks: list[TaskSpec] = []
    for i in range(count):
        family = cfg.families[i % len(cfg.families)]
        task_seed = derived_seed("synth-task", seed, i) % 1_000_000
        tasks.append(
            TaskSpec(
                task_id=f"synth-{family}-{i:04d}",
                environment="synth",
                payload={"family": family, "seed": task_seed},
            )
        )
    return tasks
