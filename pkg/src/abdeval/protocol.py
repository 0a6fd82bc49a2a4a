"""Generation loop: prompt rendering, proposal parsing, verdicts, stopping.

The loop alternates prompts and verdicts until the proposer accumulates three
bad attempts (unparsable, inconsistent, or non-novel) or runs out of replies.
Prompts are rendered from two fixed dataset-agnostic templates; replies must
be a plain two-string tuple literal. A malformed reply is evidence, not an
error: it is recorded as a bad-format attempt, never retried.
"""

from __future__ import annotations

import ast
import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Tuple

import requests

from .executor import (
    DEFAULT_LIMITS,
    ExecLimits,
    Hypothesis,
    Origin,
    PredictionSet,
    compute_prediction_set,
    evaluate_on_observations,
)
from . import dsl
from .metrics import (
    BAD_FORMAT,
    BAD_NON_NOVEL,
    GOOD,
    NOVELTY_THRESHOLD,
    Verdict,
    check_consistency,
    classify_hypothesis,
    novelty_coverage,
)
from .spaces import SampleSpace
from .values import Observation, ObservationSet, canonicalize, parse_value

TRANSCRIPT_FORMAT = "transcript/1"

STOP_THREE_BAD = "three-bad"
STOP_EXHAUSTED = "proposer-exhausted"
STOP_ABORTED = "aborted"

MAX_BAD_ATTEMPTS = 3

INIT_TEMPLATE = r"""You must return one tuple of two raw strings (no Markdown fences, no back-ticks).

  element 0 = concise natural-language hypothesis
  element 1 = FULL source of exactly one function of the input x

Code rules (apply to the source string in element 1)
- built-ins only (do not import anything)
- spaces-only indentation (4 spaces), "\n" newlines (no "\r")
- every control-flow header (if/for/while/else/elif/with/try) must break onto
  the next line; never place another statement after a colon
- at most 80 characters per line
- the source must compile and run unchanged
- do not add prints, tests, or extra defs; the function must return a value
- logic must generalize beyond the given pairs; no hard-coding

Task
- Below are (input, output) pairs O_n .
- Infer one rule consistent with all pairs and write a function that follows it
  on unseen inputs.

Pairs: {{OBS_PAIRS}}

Return only:

(
 "My hypothesis in one sentence ...",
 "def f(x):\n    # your code\n    return y"
)

Example format (strictly follow):

(
 "Return 6 if 6 appears, else 0",
 "def f(x):\n    if 6 in x:\n        return [6]\n    return [0]"
)

Note: This template is dataset-agnostic; only O_n is instantiated per task.
"""

ITER_TEMPLATE = r"""Return one tuple of two raw strings (no Markdown fences, no back-ticks).

  element 0 = concise description of a new hypothesis
  element 1 = FULL source of exactly one function of the input x

Code rules (identical to the first prompt)
- built-ins only; spaces-only indentation (4); "\n" newlines
- control-flow headers must break onto the next line; no statements after colon
- <= 80 chars per line; the source must compile and run unchanged
- no prints/tests/extra defs; the function must return a value
- generalize beyond the pairs; no hard-coding

You have proposed the following hypotheses so far (summaries below):
{{PREVIOUS_HYPOTHESES}}

Re-examine the (input, output) pairs O_n :
{{OBS_PAIRS}}

Your goal
- Invent a brand-new hypothesis that
  (i) is consistent with all pairs in O_n, and
  (ii) is distinct in underlying principle from every hypothesis above.

Return exactly:

(
 "Concise description of the new hypothesis",
 "def f(x):\n    # your code\n    return y"
)

Example format (strictly follow):

(
 "Return 6 if 6 appears, else 0",
 "def f(x):\n    if 6 in x:\n        return [6]\n    return [0]"
)

Note: This template is shared across datasets; only O_n and the list of prior
hypotheses vary.
"""


class ProposalFormatError(ValueError):
    """Reply does not match the required two-string tuple shape."""


class ProposerTransportError(RuntimeError):
    """The proposer endpoint failed; the run aborts with resumable state."""


def render_obs_pairs(obs: ObservationSet) -> str:
    return "\n".join(
        f"({canonicalize(pair.input)}, {canonicalize(pair.output)})" for pair in obs
    )


def render_init_prompt(obs: ObservationSet) -> str:
    """Fill the first-proposal template with the observation pairs."""
    if not len(obs):
        raise ValueError("cannot prompt with an empty observation set")
    return INIT_TEMPLATE.replace("{{OBS_PAIRS}}", render_obs_pairs(obs))


def render_iter_prompt(obs: ObservationSet, priors: Sequence[Hypothesis]) -> str:
    """Fill the follow-up template with prior summaries and the pairs."""
    if not priors:
        raise ValueError("iteration prompt requires at least one prior hypothesis")
    summaries = "\n".join(f"- {h.summary}" for h in priors)
    return (
        ITER_TEMPLATE.replace("{{PREVIOUS_HYPOTHESES}}", summaries)
        .replace("{{OBS_PAIRS}}", render_obs_pairs(obs))
    )


def parse_proposal(reply: str) -> Tuple[str, str]:
    """Extract (summary, program source) from a reply.

    Only surrounding whitespace is tolerated. Anything else — code fences,
    prose, a missing element, non-string elements — is a format failure.
    """
    text = reply.strip()
    if not text:
        raise ProposalFormatError("empty reply")
    if text.startswith("```") or text.endswith("```"):
        raise ProposalFormatError("reply wrapped in code fences")
    if not (text.startswith("(") and text.endswith(")")):
        raise ProposalFormatError("reply is not a tuple literal")
    try:
        value = ast.literal_eval(text)
    except (ValueError, SyntaxError) as exc:
        raise ProposalFormatError(f"not a literal tuple: {exc}")
    if not isinstance(value, tuple) or len(value) != 2:
        raise ProposalFormatError("expected a tuple of exactly two elements")
    summary, source = value
    if not isinstance(summary, str) or not isinstance(source, str):
        raise ProposalFormatError("both tuple elements must be raw strings")
    if not summary.strip():
        raise ProposalFormatError("empty hypothesis summary")
    return summary.strip(), source


class Proposer(Protocol):
    proposer_id: str

    def propose(self, prompt: str) -> Optional[str]:
        """Return the next raw reply, or None when exhausted."""


class ScriptedProposer:
    """Deterministic proposer replaying a fixed list of replies."""

    def __init__(self, replies: Sequence[str], proposer_id: str = "scripted"):
        self.proposer_id = proposer_id
        self._replies = list(replies)
        self._cursor = 0
        self.prompts: List[str] = []

    def propose(self, prompt: str) -> Optional[str]:
        self.prompts.append(prompt)
        if self._cursor >= len(self._replies):
            return None
        reply = self._replies[self._cursor]
        self._cursor += 1
        return reply


class ChatEndpointProposer:
    """Chat-completion HTTP proposer; every raw exchange is recorded."""

    def __init__(
        self,
        base_url: str,
        model: str,
        token: Optional[str] = None,
        sampling: Optional[Dict] = None,
        timeout: float = 120.0,
        proposer_id: Optional[str] = None,
        session: Optional[requests.Session] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.token = token
        self.sampling = dict(sampling or {})
        self.timeout = timeout
        self.proposer_id = proposer_id or model
        self.exchanges: List[Dict] = []
        self._session = session or requests.Session()

    def propose(self, prompt: str) -> Optional[str]:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            **self.sampling,
        }
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            response = self._session.post(
                f"{self.base_url}/chat/completions",
                json=payload,
                headers=headers,
                timeout=self.timeout,
            )
            response.raise_for_status()
            body = response.json()
        except requests.RequestException as exc:
            raise ProposerTransportError(str(exc))
        self.exchanges.append({"request": payload, "response": body})
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProposerTransportError(f"malformed completion payload: {exc}")


@dataclass(frozen=True)
class Attempt:
    """One proposer reply with its verdict."""

    index: int
    raw_reply: str
    verdict: Verdict
    summary: Optional[str] = None
    source: Optional[str] = None
    defined_count: Optional[int] = None
    prediction_digest: Optional[str] = None
    timestamp: str = ""

    @property
    def parsable(self) -> bool:
        return self.verdict.kind != BAD_FORMAT

    @property
    def consistent(self) -> bool:
        return self.verdict.kind in (GOOD, BAD_NON_NOVEL)


@dataclass(frozen=True)
class Transcript:
    """Full record of one generation run."""

    problem_id: str
    obs: ObservationSet
    space_id: str
    attempts: Tuple[Attempt, ...]
    stop_reason: str
    threshold: Fraction = NOVELTY_THRESHOLD

    def __post_init__(self):
        bads = sum(1 for a in self.attempts if a.verdict.is_bad)
        if bads > MAX_BAD_ATTEMPTS:
            raise ValueError("transcript holds more than three bad attempts")
        if (self.stop_reason == STOP_THREE_BAD) != (bads == MAX_BAD_ATTEMPTS):
            raise ValueError("stop reason does not match the bad count")

    @property
    def bad_count(self) -> int:
        return sum(1 for a in self.attempts if a.verdict.is_bad)

    @property
    def consistent_indices(self) -> Tuple[int, ...]:
        """Attempts usable for diversity scoring: parsable and consistent
        (good ones and non-novel ones alike)."""
        return tuple(a.index for a in self.attempts if a.consistent)

    @property
    def good_indices(self) -> Tuple[int, ...]:
        return tuple(a.index for a in self.attempts if a.verdict.kind == GOOD)


@dataclass
class LoopResult:
    """Transcript plus the executable artifacts of its parsable attempts."""

    transcript: Transcript
    hypotheses: Dict[int, Hypothesis] = field(default_factory=dict)
    predictions: Dict[int, PredictionSet] = field(default_factory=dict)

    def consistent_entries(self) -> List[Tuple[Hypothesis, PredictionSet]]:
        return [
            (self.hypotheses[i], self.predictions[i])
            for i in self.transcript.consistent_indices
        ]


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


def run_generation_loop(
    problem_id: str,
    obs: ObservationSet,
    proposer: Proposer,
    space: SampleSpace,
    limits: ExecLimits = DEFAULT_LIMITS,
    threshold: Fraction = NOVELTY_THRESHOLD,
    max_attempts: Optional[int] = None,
    clock: Callable[[], str] = _utc_now,
) -> LoopResult:
    """Iterate propose -> parse -> verdict until three bads or exhaustion.

    Only good attempts join the novelty reference set shown in follow-up
    prompts; consistent-but-non-novel attempts are still recorded as part of
    the consistent set for metric purposes.
    """
    attempts: List[Attempt] = []
    hypotheses: Dict[int, Hypothesis] = {}
    predictions: Dict[int, PredictionSet] = {}
    good_hypotheses: List[Hypothesis] = []
    good_predictions: List[PredictionSet] = []
    bad_count = 0
    stop_reason = STOP_EXHAUSTED
    index = 0

    while True:
        if max_attempts is not None and index >= max_attempts:
            stop_reason = STOP_EXHAUSTED
            break
        if good_hypotheses:
            prompt = render_iter_prompt(obs, good_hypotheses)
        else:
            prompt = render_init_prompt(obs)
        try:
            reply = proposer.propose(prompt)
        except ProposerTransportError:
            stop_reason = STOP_ABORTED
            break
        if reply is None:
            stop_reason = STOP_EXHAUSTED
            break

        summary: Optional[str] = None
        source: Optional[str] = None
        defined_count: Optional[int] = None
        digest: Optional[str] = None
        try:
            summary, source = parse_proposal(reply)
            program_error: Optional[str] = None
            try:
                dsl.parse_program(source)
            except dsl.DslParseError as exc:
                program_error = str(exc)
            if program_error is not None:
                verdict = classify_hypothesis(False, detail=program_error)
            else:
                outcomes = evaluate_on_observations(source, obs, limits)
                violations = check_consistency(outcomes, obs)
                if violations:
                    verdict = classify_hypothesis(True, violations=violations)
                else:
                    hypothesis = Hypothesis(
                        id=f"{problem_id}/a{index}",
                        summary=summary,
                        source=source,
                        origin=Origin(proposer.proposer_id, index),
                    )
                    prediction = compute_prediction_set(hypothesis, space, limits)
                    coverage = novelty_coverage(prediction, good_predictions)
                    verdict = classify_hypothesis(
                        True, coverage=coverage, threshold=threshold
                    )
                    hypotheses[index] = hypothesis
                    predictions[index] = prediction
                    defined_count = prediction.defined_count
                    digest = _digest(prediction.to_bytes())
                    if verdict.kind == GOOD:
                        good_hypotheses.append(hypothesis)
                        good_predictions.append(prediction)
        except ProposalFormatError as exc:
            verdict = classify_hypothesis(False, detail=str(exc))

        attempts.append(
            Attempt(
                index=index,
                raw_reply=reply,
                verdict=verdict,
                summary=summary,
                source=source,
                defined_count=defined_count,
                prediction_digest=digest,
                timestamp=clock(),
            )
        )
        if verdict.is_bad:
            bad_count += 1
            if bad_count >= MAX_BAD_ATTEMPTS:
                stop_reason = STOP_THREE_BAD
                break
        index += 1

    transcript = Transcript(
        problem_id=problem_id,
        obs=obs,
        space_id=space.space_id,
        attempts=tuple(attempts),
        stop_reason=stop_reason,
        threshold=threshold,
    )
    return LoopResult(
        transcript=transcript, hypotheses=hypotheses, predictions=predictions
    )


# ---------------------------------------------------------------------------
# Transcript files: header line, one attempt per line, stop trailer
# ---------------------------------------------------------------------------


def _verdict_to_json(verdict: Verdict) -> Dict:
    body: Dict = {"kind": verdict.kind}
    if verdict.violations:
        body["violations"] = list(verdict.violations)
    if verdict.coverage is not None:
        body["coverage"] = str(verdict.coverage)
    if verdict.detail is not None:
        body["detail"] = verdict.detail
    return body


def _verdict_from_json(body: Dict) -> Verdict:
    return Verdict(
        kind=body["kind"],
        violations=tuple(body.get("violations", ())),
        coverage=Fraction(body["coverage"]) if "coverage" in body else None,
        detail=body.get("detail"),
    )


def write_transcript(transcript: Transcript, path, meta: Optional[Dict] = None) -> None:
    """Write the transcript file; ``meta`` (run seeds, flags) joins the header."""
    header = {
        "format": TRANSCRIPT_FORMAT,
        "problem": transcript.problem_id,
        "provenance": transcript.obs.provenance,
        "pairs": [
            [canonicalize(p.input), canonicalize(p.output)] for p in transcript.obs
        ],
        "space": transcript.space_id,
        "threshold": str(transcript.threshold),
    }
    if meta:
        header["meta"] = meta
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    for attempt in transcript.attempts:
        record = {
            "attempt": attempt.index,
            "raw_reply": attempt.raw_reply,
            "verdict": _verdict_to_json(attempt.verdict),
            "timestamp": attempt.timestamp,
        }
        if attempt.summary is not None:
            record["summary"] = attempt.summary
        if attempt.source is not None:
            record["source"] = attempt.source
        if attempt.defined_count is not None:
            record["defined_count"] = attempt.defined_count
        if attempt.prediction_digest is not None:
            record["prediction"] = attempt.prediction_digest
        lines.append(json.dumps(record, sort_keys=True, separators=(",", ":")))
    trailer = {"stop_reason": transcript.stop_reason}
    lines.append(json.dumps(trailer, sort_keys=True, separators=(",", ":")))
    with open(path, "wb") as handle:
        handle.write(("\n".join(lines) + "\n").encode("utf-8"))


def read_transcript(path) -> Transcript:
    with open(path, "rb") as handle:
        lines = handle.read().decode("utf-8").splitlines()
    if len(lines) < 2:
        raise ValueError(f"{path}: truncated transcript")
    header = json.loads(lines[0])
    if header.get("format") != TRANSCRIPT_FORMAT:
        raise ValueError(f"{path}: unsupported format {header.get('format')!r}")
    pairs = tuple(
        Observation(parse_value(inp), parse_value(out)) for inp, out in header["pairs"]
    )
    obs = ObservationSet(
        problem_id=header["problem"],
        pairs=pairs,
        provenance=header.get("provenance", "pooled"),
    )
    trailer = json.loads(lines[-1])
    attempts = []
    for line in lines[1:-1]:
        record = json.loads(line)
        attempts.append(
            Attempt(
                index=record["attempt"],
                raw_reply=record["raw_reply"],
                verdict=_verdict_from_json(record["verdict"]),
                summary=record.get("summary"),
                source=record.get("source"),
                defined_count=record.get("defined_count"),
                prediction_digest=record.get("prediction"),
                timestamp=record.get("timestamp", ""),
            )
        )
    return Transcript(
        problem_id=header["problem"],
        obs=obs,
        space_id=header["space"],
        attempts=tuple(attempts),
        stop_reason=trailer["stop_reason"],
        threshold=Fraction(header.get("threshold", str(NOVELTY_THRESHOLD))),
    )


def rehydrate_loop_result(
    transcript: Transcript,
    space: SampleSpace,
    limits: ExecLimits = DEFAULT_LIMITS,
) -> LoopResult:
    """Recompute the executable artifacts of a stored transcript.

    Prediction sets are rebuilt from the recorded sources over the given
    space; recorded digests, when present, must match the recomputation.
    """
    if transcript.space_id != space.space_id:
        raise ValueError(
            f"transcript was recorded over space {transcript.space_id}, "
            f"got {space.space_id}"
        )
    result = LoopResult(transcript=transcript)
    for attempt in transcript.attempts:
        if not attempt.consistent or attempt.source is None:
            continue
        hypothesis = Hypothesis(
            id=f"{transcript.problem_id}/a{attempt.index}",
            summary=attempt.summary or "(unrecorded)",
            source=attempt.source,
        )
        prediction = compute_prediction_set(hypothesis, space, limits)
        if (
            attempt.prediction_digest is not None
            and _digest(prediction.to_bytes()) != attempt.prediction_digest
        ):
            raise ValueError(
                f"{hypothesis.id}: recomputed predictions disagree with the "
                "recorded digest (space or limits mismatch)"
            )
        result.hypotheses[attempt.index] = hypothesis
        result.predictions[attempt.index] = prediction
    return result


def replay_verdicts(
    transcript: Transcript,
    space: SampleSpace,
    limits: ExecLimits = DEFAULT_LIMITS,
) -> List[Verdict]:
    """Push a transcript's raw replies back through the pipeline; the
    resulting verdicts must match the recorded ones exactly."""
    proposer = ScriptedProposer([a.raw_reply for a in transcript.attempts])
    result = run_generation_loop(
        transcript.problem_id,
        transcript.obs,
        proposer,
        space,
        limits=limits,
        threshold=transcript.threshold,
    )
    return [a.verdict for a in result.transcript.attempts]
