import json
import threading
from fractions import Fraction
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from abdeval.metrics import BAD_FORMAT, BAD_INCONSISTENT, BAD_NON_NOVEL, GOOD
from abdeval.protocol import (
    ChatEndpointProposer,
    ProposalFormatError,
    ProposerTransportError,
    ScriptedProposer,
    STOP_ABORTED,
    STOP_EXHAUSTED,
    STOP_THREE_BAD,
    Transcript,
    parse_proposal,
    read_transcript,
    rehydrate_loop_result,
    render_init_prompt,
    render_iter_prompt,
    replay_verdicts,
    run_generation_loop,
    write_transcript,
)
from abdeval.spaces import SampleSpace, SpaceRecipe
from abdeval.values import Observation, ObservationSet


def space_of(*values):
    return SampleSpace(
        recipe=SpaceRecipe(family="list-functions", cap=0, seed=0),
        inputs=tuple(values),
    )


OBS = ObservationSet("p1", (Observation((1, 2), (2, 1)), Observation((3,), (3,))))
# the three-element input separates "reverse" from "swap a length-2 prefix"
SPACE = space_of((1, 2), (3,), (1, 2, 3), ())

REVERSE = '("Reverse the list", "reverse(x)")'
IDENTITY_BAD = '("Identity", "x")'                      # violates (1,2)->(2,1)
GARBAGE = "I think the rule is reversal!"
FENCED = '```\n("Reverse the list", "reverse(x)")\n```'
SWAP_PAIRS = '("Swap two-element lists, keep others", "if length(x) == 2 then [x[1],x[0]] else x")'


def test_init_prompt_contains_all_pairs_deterministically():
    prompt = render_init_prompt(OBS)
    assert "([1,2], [2,1])" in prompt
    assert "([3], [3])" in prompt
    assert prompt == render_init_prompt(OBS)
    assert "{{OBS_PAIRS}}" not in prompt


def test_same_template_for_onoff_problems():
    acre_obs = ObservationSet("a", (Observation((), True), Observation((1,), False)))
    prompt = render_init_prompt(acre_obs)
    generic = render_init_prompt(OBS)
    head = prompt.split("Pairs:")[0]
    assert head == generic.split("Pairs:")[0]


def test_iter_prompt_lists_priors_in_order():
    from abdeval.executor import Hypothesis

    priors = [
        Hypothesis(id="a", summary="First idea", source="x"),
        Hypothesis(id="b", summary="Second idea", source="x"),
    ]
    prompt = render_iter_prompt(OBS, priors)
    first = prompt.index("- First idea")
    second = prompt.index("- Second idea")
    assert first < second
    assert prompt == render_iter_prompt(OBS, priors)


def test_parse_proposal_accepts_template_shape():
    summary, source = parse_proposal(
        '("Return 6 if 6 appears, else 0", "if contains(x,6) then [6] else [0]")'
    )
    assert summary == "Return 6 if 6 appears, else 0"
    assert source == "if contains(x,6) then [6] else [0]"


def test_parse_proposal_tolerates_surrounding_whitespace_only():
    assert parse_proposal('  ("a", "x")  \n') == ("a", "x")
    with pytest.raises(ProposalFormatError):
        parse_proposal('prefix ("a", "x")')


def test_parse_proposal_rejects_fences_prose_and_empties():
    for reply in (FENCED, GARBAGE, "", "(1, 2)", '("only one",)', '("a", "b", "c")'):
        with pytest.raises(ProposalFormatError):
            parse_proposal(reply)


def test_loop_stop_pattern_from_worked_sequence():
    replies = [REVERSE, SWAP_PAIRS, GARBAGE, GARBAGE, GARBAGE, REVERSE]
    result = run_generation_loop("p1", OBS, ScriptedProposer(replies), SPACE)
    transcript = result.transcript
    kinds = [a.verdict.kind for a in transcript.attempts]
    assert kinds == [GOOD, GOOD, BAD_FORMAT, BAD_FORMAT, BAD_FORMAT]
    assert transcript.stop_reason == STOP_THREE_BAD
    assert transcript.bad_count == 3
    assert len(transcript.consistent_indices) == 2


def test_loop_stops_after_three_unparsable():
    result = run_generation_loop(
        "p1", OBS, ScriptedProposer([GARBAGE, FENCED, ""]), SPACE
    )
    assert result.transcript.stop_reason == STOP_THREE_BAD
    assert result.transcript.consistent_indices == ()


def test_duplicate_proposals_are_non_novel():
    replies = [REVERSE, REVERSE, REVERSE, REVERSE]
    result = run_generation_loop("p1", OBS, ScriptedProposer(replies), SPACE)
    kinds = [a.verdict.kind for a in result.transcript.attempts]
    assert kinds == [GOOD, BAD_NON_NOVEL, BAD_NON_NOVEL, BAD_NON_NOVEL]
    assert result.transcript.attempts[1].verdict.coverage == Fraction(1)
    assert result.transcript.stop_reason == STOP_THREE_BAD
    # non-novel duplicates are still consistent for metric purposes
    assert len(result.transcript.consistent_indices) == 4


def test_inconsistent_attempt_lists_violations():
    result = run_generation_loop(
        "p1", OBS, ScriptedProposer([IDENTITY_BAD]), SPACE
    )
    attempt = result.transcript.attempts[0]
    assert attempt.verdict.kind == BAD_INCONSISTENT
    assert attempt.verdict.violations == (0,)
    assert result.transcript.stop_reason == STOP_EXHAUSTED


def test_exhausted_proposer_stops_cleanly():
    result = run_generation_loop("p1", OBS, ScriptedProposer([REVERSE]), SPACE)
    assert result.transcript.stop_reason == STOP_EXHAUSTED
    assert result.transcript.bad_count == 0


def test_novelty_reference_grows_only_with_good_attempts():
    proposer = ScriptedProposer([REVERSE, IDENTITY_BAD, SWAP_PAIRS])
    result = run_generation_loop("p1", OBS, proposer, SPACE)
    iter_prompts = [p for p in proposer.prompts if "proposed the following" in p]
    # the inconsistent attempt never appears in a later prompt
    assert all("Identity" not in p for p in iter_prompts)
    assert any("Reverse the list" in p for p in iter_prompts)


def test_transcript_never_exceeds_three_bads_across_random_sequences():
    import random

    rng = random.Random(13)
    pool = [REVERSE, SWAP_PAIRS, GARBAGE, IDENTITY_BAD, FENCED]
    for _ in range(50):
        replies = [rng.choice(pool) for _ in range(rng.randint(1, 12))]
        result = run_generation_loop("p1", OBS, ScriptedProposer(replies), SPACE)
        transcript = result.transcript
        assert transcript.bad_count <= 3
        if transcript.stop_reason == STOP_THREE_BAD:
            assert transcript.bad_count == 3
            assert transcript.attempts[-1].verdict.is_bad
        else:
            assert transcript.bad_count < 3


def test_transcript_file_round_trip_and_replay(tmp_path):
    replies = [REVERSE, GARBAGE, SWAP_PAIRS, IDENTITY_BAD, FENCED]
    result = run_generation_loop(
        "p1", OBS, ScriptedProposer(replies), SPACE,
        clock=lambda: "2024-01-01T00:00:00+00:00",
    )
    path = tmp_path / "p1.transcript"
    write_transcript(result.transcript, path)
    loaded = read_transcript(path)
    assert loaded == result.transcript

    replayed = replay_verdicts(loaded, SPACE)
    assert replayed == [a.verdict for a in result.transcript.attempts]

    rehydrated = rehydrate_loop_result(loaded, SPACE)
    assert set(rehydrated.predictions) == set(result.predictions)
    for index, pred in result.predictions.items():
        assert rehydrated.predictions[index].to_bytes() == pred.to_bytes()


def test_transcript_invariant_enforced():
    with pytest.raises(ValueError):
        Transcript(
            problem_id="p",
            obs=OBS,
            space_id="s",
            attempts=(),
            stop_reason=STOP_THREE_BAD,
        )


class _StubHandler(BaseHTTPRequestHandler):
    replies = []
    calls = 0
    fail = False

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        json.loads(self.rfile.read(length))
        if type(self).fail:
            self.send_response(500)
            self.end_headers()
            return
        reply = type(self).replies[type(self).calls % len(type(self).replies)]
        type(self).calls += 1
        body = json.dumps(
            {"choices": [{"message": {"role": "assistant", "content": reply}}]}
        ).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def stub_endpoint():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


def test_chat_endpoint_proposer_records_exchanges(stub_endpoint):
    _StubHandler.replies = [REVERSE]
    _StubHandler.fail = False
    proposer = ChatEndpointProposer(stub_endpoint, model="test-model")
    reply = proposer.propose("hello")
    assert reply == REVERSE
    assert proposer.exchanges[0]["request"]["model"] == "test-model"
    assert proposer.exchanges[0]["response"]["choices"]


def test_transport_failure_aborts_run_resumably(stub_endpoint):
    _StubHandler.replies = [REVERSE]
    _StubHandler.fail = True
    proposer = ChatEndpointProposer(stub_endpoint, model="test-model")
    result = run_generation_loop("p1", OBS, proposer, SPACE)
    assert result.transcript.stop_reason == STOP_ABORTED
    assert result.transcript.attempts == ()
