"""Planner backends: answer parsing, scripted replay, heuristic rules, remote chat."""

import json

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starqa.errors import AnswerParseError, BackendError, ConfigurationError
from starqa.planner import (
    INVOKE_TOOL,
    SUFFICIENT,
    HeuristicPlanner,
    PlannerDecision,
    RemoteChatPlanner,
    ScriptedPlanner,
    _evidence_query,
    load_script,
    parse_answer,
    question_label,
)
from starqa.scheduler import StrategyConfig, run_episode
from starqa.simtools import NoiseModel, SimToolbox


# --- parse_answer ------------------------------------------------------------


def test_parse_answer_bare_letters():
    opts = ["red", "blue", "green"]
    assert parse_answer("B", opts) == 1
    assert parse_answer(" (c) ", opts) == 2
    assert parse_answer("A.", opts) == 0
    assert parse_answer("answer: b", opts) == 1
    assert parse_answer("Option C", opts) == 2


def test_parse_answer_literal_match():
    opts = ["red", "blue"]
    assert parse_answer("I think it is blue.", opts) == 1
    assert parse_answer("RED", opts) == 0


def test_parse_answer_longest_literal_wins():
    # "alpha waves" contains "alpha"; the longer option must win.
    opts = ["alpha", "alpha waves"]
    assert parse_answer("the clip shows alpha waves", opts) == 1


def test_parse_answer_letter_out_of_range_falls_through():
    # "D" with two options is not a valid letter; no literal matches either.
    with pytest.raises(AnswerParseError):
        parse_answer("D", ["red", "blue"])


def test_parse_answer_rejects_non_text():
    with pytest.raises(AnswerParseError):
        parse_answer({"answer": "A"}, ["red"])
    with pytest.raises(AnswerParseError):
        parse_answer("no option here", ["red", "blue"])


@given(st.integers(min_value=0, max_value=7), st.integers(min_value=1, max_value=8))
def test_parse_answer_letter_roundtrip(idx, n):
    opts = [f"opt{i}" for i in range(n)]
    letter = "ABCDEFGH"[idx]
    if idx < n:
        assert parse_answer(letter, opts) == idx
    else:
        with pytest.raises(AnswerParseError):
            parse_answer(letter, opts)


def test_question_label():
    assert question_label("How many instances of cup appear in the video?") == "cup"
    assert question_label("what happens first?") == "what happens first?"


# --- scripted ----------------------------------------------------------------


def _decisions(*names):
    return [PlannerDecision(INVOKE_TOOL, n, {}, "") for n in names]


def test_scripted_replays_in_order():
    p = ScriptedPlanner(_decisions("a", "b", "c"), answer="red")
    p.begin_episode("e1")
    assert [p.select_tool("q", (), "", []).tool_name for _ in range(3)] == ["a", "b", "c"]
    assert p.generate_answer("q", ("red",), "") == "red"
    # begin_episode resets the queue.
    p.begin_episode("e2")
    assert p.select_tool("q", (), "", []).tool_name == "a"


def test_scripted_corrective_repeats_last_choice():
    p = ScriptedPlanner(_decisions("a", "b"), answer="")
    p.begin_episode("e")
    first = p.select_tool("q", (), "", [])
    again = p.select_tool("q", (), "", [], corrective=True)
    assert again is first
    assert p.select_tool("q", (), "", []).tool_name == "b"


def test_scripted_exhaustion_raises():
    p = ScriptedPlanner(_decisions("a"), answer="")
    p.begin_episode("e")
    p.select_tool("q", (), "", [])
    with pytest.raises(BackendError):
        p.select_tool("q", (), "", [])


def test_scripted_default_sufficiency_schedule():
    # Sufficient only once a single (terminal) decision remains queued.
    p = ScriptedPlanner(_decisions("a", "b", "c"), answer="")
    p.begin_episode("e")
    assert not p.judge_sufficiency("q", (), "")
    p.select_tool("q", (), "", [])
    assert not p.judge_sufficiency("q", (), "")
    p.select_tool("q", (), "", [])
    assert p.judge_sufficiency("q", (), "")


def test_scripted_explicit_sufficiency_queue():
    p = ScriptedPlanner(_decisions("a", "b"), answer="", sufficiency=[True, False])
    p.begin_episode("e")
    assert p.judge_sufficiency("q", (), "")
    assert not p.judge_sufficiency("q", (), "")
    # Queue exhausted: falls back to the default schedule.
    assert not p.judge_sufficiency("q", (), "")


def test_scripted_from_trace_reproduces_decisions(registry, small_suite):
    video, qa = small_suite.items[0].video, small_suite.items[0].qa
    planner = HeuristicPlanner(seed=3)
    toolbox = SimToolbox.for_item(video, noise=NoiseModel(seed=7))
    answer, trace = run_episode(
        video, qa, registry, planner, toolbox,
        StrategyConfig(), episode_id="star:" + qa.qa_id,
    )
    rebuilt = ScriptedPlanner.from_trace(trace, qa)
    rebuilt.begin_episode(trace.episode_id)
    for step in trace.steps:
        d = rebuilt.select_tool(qa.question, qa.options, "", [])
        assert d.tool_name == step.tool_name
        assert d.tool_args == dict(step.planner_args)
    if 0 <= trace.final_answer < len(qa.options):
        assert rebuilt.generate_answer(qa.question, qa.options, "") == qa.options[trace.final_answer]


def test_load_script_roundtrip(tmp_path):
    path = tmp_path / "script.json"
    path.write_text(json.dumps({
        "decisions": [
            {"tool_name": "image_captioner"},
            {"tool_name": "video_qa", "tool_args": {"question": "q"}, "rationale": "end"},
        ],
        "answer": "blue",
        "sufficiency": [False, True],
    }))
    kwargs = load_script(path)
    p = ScriptedPlanner(**kwargs)
    p.begin_episode("e")
    assert p.select_tool("q", (), "", []).tool_name == "image_captioner"
    d = p.select_tool("q", (), "", [])
    assert d.tool_args == {"question": "q"} and d.rationale == "end"
    assert p.generate_answer("q", (), "") == "blue"


def test_load_script_rejects_bad_files(tmp_path):
    missing = tmp_path / "nope.json"
    with pytest.raises(ConfigurationError):
        load_script(missing)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"decisions": [{"tool_args": {}}]}))
    with pytest.raises(ConfigurationError):
        load_script(bad)
    notalist = tmp_path / "notalist.json"
    notalist.write_text(json.dumps({"decisions": "image_captioner"}))
    with pytest.raises(ConfigurationError):
        load_script(notalist)


# --- heuristic ---------------------------------------------------------------


def test_heuristic_opens_with_captioning_when_unbiased(registry):
    p = HeuristicPlanner(shortcut_bias=0.0, seed=0)
    p.begin_episode("e:1")
    d = p.select_tool("How many instances of cup appear?", ("1", "2"), "", list(registry.cards()))
    assert d.tool_name == "image_captioner"


def test_heuristic_full_bias_takes_whole_video_shortcut(registry):
    p = HeuristicPlanner(shortcut_bias=1.0, seed=0)
    p.begin_episode("e:1")
    d = p.select_tool("How many instances of cup appear?", ("1", "2"), "", list(registry.cards()))
    assert d.tool_name == "video_qa"


def test_heuristic_shortcut_draw_is_deterministic_per_episode():
    p = HeuristicPlanner(shortcut_bias=0.5, seed=11)
    draws = []
    for _ in range(2):
        p.begin_episode("e:42")
        draws.append(p._shortcut)
    assert draws[0] == draws[1]
    # Different episodes may draw differently; over many ids both outcomes occur.
    outcomes = set()
    for i in range(40):
        p.begin_episode(f"e:{i}")
        outcomes.add(p._shortcut)
    assert outcomes == {True, False}


def test_heuristic_terminal_pick_depends_on_evidence(registry):
    general = [registry.get(n) for n in ("video_qa", "video_summarizer", "text_summarizer")]
    p = HeuristicPlanner()
    p.begin_episode("e")
    blind = p.select_tool("q", (), "", general)
    assert blind.tool_name == "video_qa"
    informed = p.select_tool("q", (), "frame 0: caption=objects: cup", general)
    assert informed.tool_name == "text_summarizer"


def test_heuristic_sufficiency_needs_count_phrasing():
    p = HeuristicPlanner()
    p.begin_episode("e")
    assert not p.judge_sufficiency("How many?", ("2", "3"), "frame 2: marks=...")
    assert p.judge_sufficiency("How many?", ("2", "3"), "tracked 2 distinct cup instances")
    assert p.judge_sufficiency("What color?", ("red", "blue"), "frame 1: qa=answer: red")
    assert not p.judge_sufficiency("What color?", ("red", "blue"), "frame 1: caption=-")


def test_heuristic_answer_prefers_answer_lines():
    p = HeuristicPlanner()
    p.begin_episode("e")
    ctx = "frame 0: qa=answer: red\nframe 4: qa=answer: blue"
    assert p.generate_answer("What color?", ("red", "blue"), ctx) == "blue"


def test_heuristic_answer_orders_by_first_mention():
    p = HeuristicPlanner()
    p.begin_episode("e")
    ctx = "frame 0: caption=events: beta waves\nframe 9: caption=events: alpha sits"
    got = p.generate_answer("Which happens first?", ("alpha sits", "beta waves"), ctx)
    assert got == "beta waves"


def test_heuristic_answer_falls_back_to_first_option():
    p = HeuristicPlanner()
    p.begin_episode("e")
    assert p.generate_answer("q", ("red", "blue"), "nothing useful") == "red"


def test_evidence_query_quotes_matching_caption_events():
    ctx = (
        "frame 0: caption=objects: cup; text: -; events: alpha pours tea\n"
        "frame 9: caption=objects: dog; text: -; events: beta barks"
    )
    q = "What color is the cup in the clip?"
    assert _evidence_query(q, ("red", "blue"), ctx) == q + " alpha pours tea"
    # No captions: the bare question comes back.
    assert _evidence_query(q, ("red", "blue"), "frame 0: marks=[]") == q
    # Caption without events carries no cue.
    assert _evidence_query(q, (), "frame 0: caption=objects: cup; events: -") == q


# --- remote chat -------------------------------------------------------------


def _fenced(obj) -> str:
    return "Thinking...\n```json\n" + json.dumps(obj) + "\n```"


def _remote(handler, **kwargs) -> RemoteChatPlanner:
    return RemoteChatPlanner(
        url="http://planner.test/chat", transport=httpx.MockTransport(handler), **kwargs
    )


def test_remote_requires_endpoint(monkeypatch):
    monkeypatch.delenv("STAR_PLANNER_URL", raising=False)
    with pytest.raises(BackendError):
        RemoteChatPlanner()


def test_remote_select_tool_roundtrip(registry):
    seen = []

    def handler(request):
        body = json.loads(request.content)
        seen.append(body)
        return httpx.Response(200, json={"content": _fenced({
            "kind": "invoke_tool", "tool_name": "image_captioner",
            "tool_args": {"frames": [0]}, "rationale": "look first",
        })})

    p = _remote(handler, token="tok-123")
    p.begin_episode("e")
    cards = [registry.get("image_captioner")]
    d = p.select_tool("q?", ("a", "b"), "ctx", cards)
    assert d == PlannerDecision(INVOKE_TOOL, "image_captioner", {"frames": [0]}, "look first")
    body = seen[0]
    assert body["temperature"] == 0
    assert body["tool_cards"][0]["name"] == "image_captioner"
    assert "system" in body and body["system"]
    assert body["messages"][0]["role"] == "user"


def test_remote_sends_bearer_token():
    headers = []

    def handler(request):
        headers.append(request.headers.get("authorization"))
        return httpx.Response(200, json={"content": _fenced({"sufficient": True})})

    p = _remote(handler, token="tok-123")
    assert p.judge_sufficiency("q", (), "") is True
    assert headers == ["Bearer tok-123"]


def test_remote_sufficient_decision():
    def handler(request):
        return httpx.Response(200, json={"content": _fenced({"kind": "sufficient", "rationale": "done"})})

    d = _remote(handler).select_tool("q", (), "", [])
    assert d.kind == SUFFICIENT and d.rationale == "done"


def test_remote_retries_once_on_malformed_block():
    calls = []

    def handler(request):
        calls.append(json.loads(request.content)["messages"])
        if len(calls) == 1:
            return httpx.Response(200, json={"content": "no block here"})
        return httpx.Response(200, json={"content": _fenced({"answer": "a"})})

    assert _remote(handler).generate_answer("q", ("a",), "") == "a"
    assert len(calls) == 2
    # The retry keeps the conversation and appends a corrective user message.
    assert len(calls[1]) == 2 and "fenced json block" in calls[1][1]["content"]


def test_remote_two_malformed_replies_raise():
    def handler(request):
        return httpx.Response(200, json={"content": "```json\n{broken\n```"})

    with pytest.raises(BackendError):
        _remote(handler).judge_sufficiency("q", (), "")


def test_remote_multiple_blocks_rejected():
    two = _fenced({"a": 1}) + "\n" + _fenced({"b": 2})

    def handler(request):
        return httpx.Response(200, json={"content": two})

    with pytest.raises(BackendError):
        _remote(handler).judge_sufficiency("q", (), "")


def test_remote_http_error_retried_then_fatal():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(503, text="overloaded")

    with pytest.raises(BackendError):
        _remote(handler).generate_answer("q", (), "")
    assert len(calls) == 2


def test_remote_bad_decision_object_is_fatal():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(200, json={"content": _fenced({"kind": "invoke_tool"})})

    with pytest.raises(BackendError):
        _remote(handler).select_tool("q", (), "", [])
    # The block itself parsed, so no retry happens.
    assert len(calls) == 1


def test_remote_bad_answer_object_is_fatal():
    def handler(request):
        return httpx.Response(200, json={"content": _fenced({"answer": 7})})

    with pytest.raises(BackendError):
        _remote(handler).generate_answer("q", (), "")


def test_remote_non_json_content_envelope():
    def handler(request):
        return httpx.Response(200, text="plain text")

    with pytest.raises(BackendError):
        _remote(handler).judge_sufficiency("q", (), "")
