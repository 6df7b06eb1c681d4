import pytest
from hypothesis import given, settings, strategies as st

from paf.graph import Edge, Node, validate_map
from paf.judge import (
    JUDGE_QUESTION,
    JudgeUnavailable,
    build_judge_prompt,
    judge_node,
    parse_verdict,
)
from paf.providers import ChatMessage, FailingChatProvider, MockChatProvider


@pytest.fixture
def insurance_map():
    return validate_map(
        "triage",
        [
            Node("start", "start", "greet the caller"),
            Node("check_insurance", "generic", "ask about insurance"),
            Node("n2", "generic", "collect the member id"),
            Node("fin", "end", ""),
        ],
        [
            Edge("start", "check_insurance", "caller responded"),
            Edge("check_insurance", "n2", "caller has insurance"),
            Edge("check_insurance", "fin", "caller declined"),
        ],
    )


class TestBuildPrompt:
    def test_start_of_task_fallback(self, insurance_map):
        prompt = build_judge_prompt(insurance_map, [], None, "triage")
        assert "This is the start of the task triage, proceed to Node start." in prompt[0].content
        assert prompt[-1].content == JUDGE_QUESTION

    def test_anchor_lists_children(self, insurance_map):
        prompt = build_judge_prompt(insurance_map, [], "check_insurance", "triage")
        system = prompt[0].content
        assert "You were previously on Node check_insurance" in system
        assert "Node n2: collect the member id" in system
        assert "Node fin" in system
        assert "caller has insurance" in system  # edge condition included
        assert "start -> check_insurance" in system

    def test_start_node_children_only(self, insurance_map):
        prompt = build_judge_prompt(insurance_map, [], "start", "t")
        system = prompt[0].content
        assert system.count("- Node ") == 1
        assert "- Node check_insurance" in system

    def test_each_id_appears(self, insurance_map):
        prompt = build_judge_prompt(insurance_map, [], "check_insurance", "t")
        system = prompt[0].content
        assert system.count("Node check_insurance") == 1
        assert system.count("Node n2:") == 1
        assert system.count("Node fin:") == 1

    def test_deterministic(self, insurance_map):
        history = [ChatMessage("user", "hi"), ChatMessage("assistant", "hello")]
        a = build_judge_prompt(insurance_map, history, "check_insurance", "t")
        b = build_judge_prompt(insurance_map, history, "check_insurance", "t")
        assert [(m.role, m.content) for m in a] == [(m.role, m.content) for m in b]


class TestParseVerdict:
    def test_keyword_match(self, insurance_map):
        verdict = parse_verdict(insurance_map, "I am currently on Node check_insurance.")
        assert verdict.identified and verdict.node == "check_insurance"

    def test_unknown_node_invalid(self, insurance_map):
        verdict = parse_verdict(insurance_map, "I am on Node zzz")
        assert verdict.kind == "invalid_node"
        assert verdict.invalid_id == "zzz"

    def test_no_mention_unparseable(self, insurance_map):
        verdict = parse_verdict(insurance_map, "I'm not sure where we are.")
        assert verdict.kind == "unparseable"

    def test_bare_known_id(self, insurance_map):
        verdict = parse_verdict(insurance_map, "probably check_insurance at this point")
        assert verdict.identified and verdict.node == "check_insurance"

    def test_first_mention_wins(self, insurance_map):
        verdict = parse_verdict(insurance_map, "Node n2, or maybe Node fin")
        assert verdict.node == "n2"

    def test_keyword_case_insensitive(self, insurance_map):
        verdict = parse_verdict(insurance_map, "we are at NODE n2 now")
        assert verdict.node == "n2"

    def test_bare_id_not_matched_inside_longer_word(self, insurance_map):
        verdict = parse_verdict(insurance_map, "that is not fine at all")
        # "fin" must not match inside "fine"
        assert verdict.kind == "unparseable"

    @given(st.text(max_size=200))
    @settings(max_examples=300)
    def test_never_identifies_absent_id(self, raw):
        nav = validate_map(
            "tiny",
            [Node("start", "start", "hi"), Node("alpha", "end", "")],
            [Edge("start", "alpha", "done")],
        )
        verdict = parse_verdict(nav, raw)
        if verdict.identified:
            assert verdict.node in nav.nodes


class TestJudgeNode:
    def test_scripted_identification(self, insurance_map):
        provider = MockChatProvider().script("Node n2", last_user=JUDGE_QUESTION)
        verdict = judge_node(insurance_map, [], "check_insurance", "t", provider)
        assert verdict.identified and verdict.node == "n2"

    def test_scripted_invalid(self, insurance_map):
        provider = MockChatProvider().script("Node bogus", last_user=JUDGE_QUESTION)
        verdict = judge_node(insurance_map, [], "check_insurance", "t", provider)
        assert verdict.kind == "invalid_node"

    def test_provider_failure_is_distinguishable(self, insurance_map):
        with pytest.raises(JudgeUnavailable):
            judge_node(insurance_map, [], "start", "t", FailingChatProvider())

    def test_exactly_one_call(self, insurance_map):
        provider = MockChatProvider().script("nothing useful", last_user=JUDGE_QUESTION)
        judge_node(insurance_map, [], "start", "t", provider)
        assert provider.call_count == 1

    def test_walks_scripted_sequence(self, healthcare_map):
        from paf.providers import SequenceChatProvider

        script = ["Node ask_insurance", "Node check_eligibility", "Node schedule", "Node done"]
        provider = SequenceChatProvider(script)
        last = None
        seen = []
        for _ in script:
            verdict = judge_node(healthcare_map, [], last, "care", provider)
            assert verdict.identified
            seen.append(verdict.node)
            last = verdict.node
        assert seen == ["ask_insurance", "check_eligibility", "schedule", "done"]
