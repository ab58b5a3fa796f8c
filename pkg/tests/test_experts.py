"""Expert behavior: proposal contract, fallback scoring, scripted specialists."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from council.envs.base import TaskSpec
from council.envs.synth import SynthConfig, SynthEnv, family_vocab, hidden_sequence
from council.errors import ProviderError, ScoreParseError
from council.experts import (
    ConstantEvaluatorExpert,
    Council,
    Game24OracleExpert,
    LLMExpert,
    RandomExpert,
    SynthSpecialistExpert,
    TableExpert,
    evaluate_plausibility,
    propose_actions,
)
from council.gateway import StubBackend
from council.trajectory import Trajectory, serialize_trajectory

from conftest import make_trajectory


def test_proposals_deduplicate_and_preserve_order():
    expert = TableExpert("t", {"": ["a", "a", "b"]})
    proposals = propose_actions(expert, Trajectory(), None, 5)
    assert [p.action.text for p in proposals] == ["a", "b"]
    assert all(p.expert_id == "t" for p in proposals)


def test_proposals_truncate_to_k():
    expert = TableExpert("t", {"": ["a", "b", "c", "d"]})
    proposals = propose_actions(expert, Trajectory(), None, 2)
    assert [p.action.text for p in proposals] == ["a", "b"]


def test_proposal_count_must_be_positive():
    expert = TableExpert("t", {})
    with pytest.raises(ValueError):
        propose_actions(expert, Trajectory(), None, 0)


def test_table_expert_keys_on_serialized_prefix():
    prefix = make_trajectory([("obs", "act")], pending="next")
    expert = TableExpert("t", {serialize_trajectory(prefix): ["move"]})
    assert expert.propose(prefix, None, 3) == ["move"]
    assert expert.propose(Trajectory(), None, 3) == []


def test_random_expert_rejects_empty_pool():
    with pytest.raises(ValueError):
        RandomExpert("r", [])


@given(st.integers(0, 10), st.text(max_size=20), st.integers(1, 6))
def test_random_expert_is_a_pure_function_of_inputs(seed, obs, k):
    pool = [f"tok{i}" for i in range(6)]
    expert = RandomExpert("r", pool, seed=seed)
    prefix = make_trajectory([], pending=obs)
    first = expert.propose(prefix, None, k)
    second = expert.propose(prefix, None, k)
    assert first == second
    assert len(first) == min(k, len(pool))
    assert len(set(first)) == len(first)
    assert all(a in pool for a in first)


# -- fallback scoring ----------------------------------------------------------


def test_plausibility_passes_through_in_range():
    assert evaluate_plausibility(ConstantEvaluatorExpert("c", 1.0), Trajectory()) == 1.0
    assert evaluate_plausibility(ConstantEvaluatorExpert("c", 0.25), Trajectory()) == 0.25


def test_plausibility_clamps_out_of_range_scores():
    assert evaluate_plausibility(ConstantEvaluatorExpert("c", 1.7), Trajectory()) == 1.0
    assert evaluate_plausibility(ConstantEvaluatorExpert("c", -0.3), Trajectory()) == 0.0


def test_exhausted_backend_scores_neutral():
    backend = StubBackend(["0.9"], failures=2)
    expert = LLMExpert("llm", backend)
    assert evaluate_plausibility(expert, make_trajectory([], pending="task")) == 0.5
    # Both the original send and its retry were consumed.
    assert backend.usage.requests == 2


def test_unparseable_reply_gets_one_fresh_attempt():
    backend = StubBackend(["no score in this reply", "7"])
    expert = LLMExpert("llm", backend)
    assert evaluate_plausibility(expert, make_trajectory([], pending="task")) == 0.7


def test_two_unparseable_replies_score_neutral():
    backend = StubBackend(["nothing here", "still nothing"])
    expert = LLMExpert("llm", backend)
    assert evaluate_plausibility(expert, make_trajectory([], pending="task")) == 0.5


def test_provider_error_inside_plausibility_is_retried():
    class Flaky(ConstantEvaluatorExpert):
        def __init__(self):
            super().__init__("f", 0.8)
            self.calls = 0

        def plausibility(self, prefix):
            self.calls += 1
            if self.calls == 1:
                raise ProviderError("hiccup")
            return self.score

    flaky = Flaky()
    assert evaluate_plausibility(flaky, Trajectory()) == 0.8
    assert flaky.calls == 2


def test_score_parse_error_twice_scores_neutral():
    class Broken(ConstantEvaluatorExpert):
        def plausibility(self, prefix):
            raise ScoreParseError("no number")

    assert evaluate_plausibility(Broken("b", 0.0), Trajectory()) == 0.5


# -- 24-game oracle expert -------------------------------------------------------


def g24_prefix(text: str) -> Trajectory:
    return make_trajectory([], pending=text)


def test_oracle_expert_replays_the_witness_move():
    expert = Game24OracleExpert("g")
    actions = expert.propose(g24_prefix("numbers: 4 4 10 10"), None, 5)
    assert len(actions) == 1
    # The proposed move must keep the task solvable.
    from council.envs.game24 import game24_oracle, game24_step, parse_numbers

    numbers, outcome = game24_step((4.0, 4.0, 10.0, 10.0), actions[0])
    assert not outcome.invalid
    assert game24_oracle(numbers)[0]


def test_oracle_expert_falls_back_to_legal_moves_when_unsolvable():
    from council.envs.game24 import legal_actions

    expert = Game24OracleExpert("g")
    actions = expert.propose(g24_prefix("numbers: 1 1 1 1"), None, 50)
    assert actions == legal_actions((1.0, 1.0, 1.0, 1.0))


def test_oracle_expert_offers_nothing_on_terminal_or_foreign_text():
    expert = Game24OracleExpert("g")
    assert expert.propose(g24_prefix("solved; numbers: 24"), None, 3) == []
    assert expert.propose(g24_prefix("[amber#a] go +a/d ~a/c"), None, 3) == []


def test_oracle_expert_scores_solvability():
    expert = Game24OracleExpert("g")
    assert expert.plausibility(g24_prefix("numbers: 4 4 10 10")) == 1.0
    assert expert.plausibility(g24_prefix("numbers: 1 1 1 1")) == 0.0
    assert expert.plausibility(g24_prefix("solved; numbers: 24")) == 1.0
    assert expert.plausibility(g24_prefix("failed; numbers: 23")) == 0.0
    assert expert.plausibility(g24_prefix("not a numbers line")) == 0.5


# -- synth specialist expert -----------------------------------------------------


def synth_setup(config: SynthConfig | None = None):
    cfg = config if config is not None else SynthConfig()
    env = SynthEnv(cfg)
    task = TaskSpec(task_id="synth-amber-0000", environment="synth", payload={"family": "amber", "seed": 7})
    state, obs = env.initial(task)
    return cfg, env, task, state, obs


def test_specialist_always_includes_the_correct_token_in_family():
    cfg, env, task, state, obs = synth_setup()
    expert = SynthSpecialistExpert("amber-specialist", "amber", cfg)
    correct = hidden_sequence("amber", 7, cfg)[0]
    for k in (1, 2, 5):
        actions = expert.propose(make_trajectory([], pending=obs.text), None, k)
        assert correct in actions
        assert len(actions) == k
    only = expert.propose(make_trajectory([], pending=obs.text), None, 1)
    assert only == [correct]


def test_specialist_proposals_are_deterministic():
    cfg, env, task, state, obs = synth_setup()
    expert = SynthSpecialistExpert("amber-specialist", "amber", cfg, seed=3)
    prefix = make_trajectory([], pending=obs.text)
    assert expert.propose(prefix, None, 4) == expert.propose(prefix, None, 4)


def test_specialist_out_of_family_offers_only_its_own_vocabulary():
    cfg, env, task, state, obs = synth_setup()
    expert = SynthSpecialistExpert("basalt-specialist", "basalt", cfg)
    actions = expert.propose(make_trajectory([], pending=obs.text), None, 6)
    assert actions
    assert all(a in family_vocab("basalt", cfg) for a in actions)
    correct = hidden_sequence("amber", 7, cfg)[0]
    assert correct not in actions


def test_specialist_silent_on_terminal_and_unparseable_states():
    cfg, env, task, state, obs = synth_setup()
    expert = SynthSpecialistExpert("amber-specialist", "amber", cfg)
    answer = env.hidden(task)
    for token in answer:
        state, outcome = env.apply(task, state, token)
    assert outcome.terminal
    assert expert.propose(make_trajectory([], pending=outcome.observation.text), None, 3) == []
    assert expert.propose(make_trajectory([], pending="gibberish"), None, 3) == []


def test_specialist_scores_progress_fraction():
    cfg, env, task, state, obs = synth_setup(SynthConfig(depth=4))
    expert = SynthSpecialistExpert("amber-specialist", "amber", cfg)
    answer = env.hidden(task)
    state, outcome = env.apply(task, state, answer[0])
    state, outcome = env.apply(task, state, answer[1])
    prefix = make_trajectory([], pending=outcome.observation.text)
    assert expert.plausibility(prefix) == pytest.approx(0.5)


def test_specialist_penalizes_burned_attempts():
    cfg, env, task, state, obs = synth_setup(SynthConfig(depth=4, budget=4))
    expert = SynthSpecialistExpert("amber-specialist", "amber", cfg)
    wrong = next(t for t in family_vocab("amber", cfg) if t != env.hidden(task)[0])
    state, outcome = env.apply(task, state, wrong)
    prefix = make_trajectory([], pending=outcome.observation.text)
    # done 0 of 4, one miss of four: 0.0 - 0.35 * (1/4) clamps at 0.
    assert expert.plausibility(prefix) == 0.0


def test_specialist_scores_terminals_exactly():
    cfg, env, task, state, obs = synth_setup()
    expert = SynthSpecialistExpert("amber-specialist", "amber", cfg)
    answer = env.hidden(task)
    win = state
    for token in answer:
        win, outcome = env.apply(task, win, token)
    assert expert.plausibility(make_trajectory([], pending=outcome.observation.text)) == 1.0
    wrong = next(t for t in family_vocab("amber", cfg) if t != answer[0])
    lose = state
    outcome = None
    for _ in range(cfg.budget):
        lose, outcome = env.apply(task, lose, wrong)
    assert outcome.terminal
    assert expert.plausibility(make_trajectory([], pending=outcome.observation.text)) == 0.0


def test_foreign_family_judge_is_exactly_neutral():
    cfg, env, task, state, obs = synth_setup()
    expert = SynthSpecialistExpert("basalt-specialist", "basalt", cfg, eval_noise=0.5)
    prefix = make_trajectory([], pending=obs.text)
    assert expert.plausibility(prefix) == 0.5


def test_eval_noise_perturbs_in_family_scores_deterministically():
    cfg, env, task, state, obs = synth_setup()
    noisy = SynthSpecialistExpert("amber-specialist", "amber", cfg, eval_noise=0.2)
    clean = SynthSpecialistExpert("amber-specialist", "amber", cfg)
    prefix = make_trajectory([], pending=obs.text)
    a = noisy.plausibility(prefix)
    assert a == noisy.plausibility(prefix)
    assert 0.0 <= a <= 1.0
    assert clean.plausibility(prefix) == 0.0


# -- language-model expert --------------------------------------------------------


def test_llm_expert_takes_first_nonempty_line_per_completion():
    backend = StubBackend(["  \nuse the lever\nextra", "press the button"])
    expert = LLMExpert("llm", backend)
    actions = expert.propose(make_trajectory([], pending="a task"), None, 2)
    assert actions == ["use the lever", "press the button"]
    assert backend.usage.requests == 2


def test_llm_expert_evaluates_with_score_parsing():
    backend = StubBackend(["Score: 8"])
    expert = LLMExpert("llm", backend)
    assert expert.plausibility(make_trajectory([], pending="a task")) == pytest.approx(0.8)


# -- council -----------------------------------------------------------------------


def test_council_requires_members_and_unique_ids():
    with pytest.raises(ValueError):
        Council([])
    with pytest.raises(ValueError):
        Council([ConstantEvaluatorExpert("x", 0.5), ConstantEvaluatorExpert("x", 0.5)])


def test_council_builds_one_profile_per_expert():
    council = Council([ConstantEvaluatorExpert("a", 0.5), ConstantEvaluatorExpert("b", 0.5)])
    assert set(council.profiles) == {"a", "b"}
    assert council.profile("a").expert_id == "a"
    assert [d.expert_id for d in council.members] == ["a", "b"]


def test_subset_shares_profile_objects():
    council = Council([ConstantEvaluatorExpert("a", 0.5), ConstantEvaluatorExpert("b", 0.5)])
    sub = council.subset(["b"])
    assert len(sub) == 1
    assert sub.profile("b") is council.profile("b")
