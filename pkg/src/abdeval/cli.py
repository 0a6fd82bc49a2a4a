"""Batch command line: space building, evaluation runs, simulations,
preference export, curriculum replay, and reports.

Exit codes: 0 success, 1 usage error, 2 data error, 3 external-service
failure. Every output file starts with a versioned header line and is a pure
function of (inputs, flags, seeds).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from typing import List, Optional, Sequence

from . import curriculum, datasets, preferences, reports, simulation
from .executor import (
    ExecLimits,
    Hypothesis,
    TransportError,
    compute_prediction_sets,
)
from .protocol import (
    ChatEndpointProposer,
    ProposerTransportError,
    ScriptedProposer,
    read_transcript,
    rehydrate_loop_result,
    run_generation_loop,
    write_transcript,
)
from .spaces import (
    CorpusError,
    build_acre_space,
    build_corpus_space,
    build_list_function_space,
    read_space,
    sample_observations,
    write_space,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_EXTERNAL = 3

HYPOTHESES_FORMAT = "hypotheses/1"
REPLIES_FORMAT = "replies/1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _limits_from_args(args) -> ExecLimits:
    return ExecLimits(time_limit=args.time_limit, max_steps=args.max_steps)


def _add_limit_flags(parser) -> None:
    parser.add_argument("--time-limit", type=float, default=1.0,
                        help="per-call wall-clock budget in seconds")
    parser.add_argument("--max-steps", type=int, default=200_000,
                        help="per-call step budget")


def _read_json(path) -> dict:
    with open(path, "rb") as handle:
        return json.loads(handle.read().decode("utf-8"))


def _load_hypotheses(path) -> List[Hypothesis]:
    with open(path, "rb") as handle:
        lines = handle.read().decode("utf-8").splitlines()
    if not lines:
        raise CorpusError(f"{path}: empty hypotheses file")
    header = json.loads(lines[0])
    if header.get("format") != HYPOTHESES_FORMAT:
        raise CorpusError(f"{path}: unsupported format {header.get('format')!r}")
    out = []
    for line in lines[1:]:
        if not line.strip():
            continue
        record = json.loads(line)
        out.append(Hypothesis(
            id=record["id"],
            summary=record.get("summary", record["id"]),
            source=record["source"],
        ))
    return out


def _problem_runs(args, limits: ExecLimits) -> List[simulation.ProblemRun]:
    space = read_space(args.space)
    pools = {p.problem_id: p for p in datasets.load_problem_file(args.problems)}
    runs = []
    for path in args.transcripts:
        transcript = read_transcript(path)
        pool = pools.get(transcript.problem_id)
        if pool is None:
            raise CorpusError(
                f"{path}: problem {transcript.problem_id} not in {args.problems}"
            )
        key_to_index = {pair.key(): i for i, pair in enumerate(pool.pairs)}
        try:
            sample_indices = tuple(
                key_to_index[pair.key()] for pair in transcript.obs
            )
        except KeyError as exc:
            raise CorpusError(
                f"{path}: observation {exc} not found in the problem pool"
            )
        result = rehydrate_loop_result(transcript, space, limits)
        runs.append(simulation.ProblemRun(
            problem_id=transcript.problem_id,
            dataset=args.dataset,
            pool=pool,
            sample_indices=sample_indices,
            candidates=tuple(result.consistent_entries()),
        ))
    return runs


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_build_space(args) -> int:
    if args.family == "list-functions":
        space = build_list_function_space(seed=args.seed, cap_per_length=args.cap)
    elif args.family == "acre":
        space = build_acre_space(seed=args.seed, cap_per_count=args.cap)
    else:
        if not args.corpus:
            raise UsageError("grid-corpus requires --corpus")
        space = build_corpus_space(datasets.collect_corpus_grids(args.corpus))
    write_space(space, args.out)
    print(f"{space.recipe.family}: {space.size} inputs -> {args.out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    space = read_space(args.space)
    hypotheses = _load_hypotheses(args.hypotheses)
    limits = _limits_from_args(args)
    preds = compute_prediction_sets(hypotheses, space, limits, workers=args.workers)
    os.makedirs(args.out_dir, exist_ok=True)
    for pred in preds:
        name = pred.hypothesis_id.replace("/", "_") + ".pred"
        with open(os.path.join(args.out_dir, name), "wb") as handle:
            handle.write(pred.to_bytes())
    columns = ["hypothesis", "defined", "size", "coverage"]
    rows = [
        [p.hypothesis_id, str(p.defined_count), str(p.size),
         reports.render_cell(Fraction(p.defined_count, p.size))]
        for p in preds
    ]
    table = reports.render_table(columns, rows)
    reports.write_text(table, os.path.join(args.out_dir, "coverage.txt"))
    print(table, end="")
    return EXIT_OK


def _load_replies(path) -> List[str]:
    body = _read_json(path)
    if body.get("format") != REPLIES_FORMAT or "replies" not in body:
        raise CorpusError(f"{path}: expected a {REPLIES_FORMAT} file")
    return list(body["replies"])


def _cmd_run(args) -> int:
    space = read_space(args.space)
    limits = _limits_from_args(args)
    problems = datasets.load_problem_file(args.problems)
    if args.problem_id:
        problems = [p for p in problems if p.problem_id in set(args.problem_id)]
        if not problems:
            raise CorpusError("no problems left after --problem-id filtering")
    os.makedirs(args.out_dir, exist_ok=True)
    aborted = []
    for problem in problems:
        obs = sample_observations(
            problem, n=args.n, seed=args.seed,
            require_both_labels=args.require_both_labels,
        )
        if args.replies:
            proposer = ScriptedProposer(_load_replies(args.replies))
        else:
            if not args.endpoint_url or not args.model:
                raise UsageError("provide --replies or --endpoint-url with --model")
            proposer = ChatEndpointProposer(
                base_url=args.endpoint_url,
                model=args.model,
                token=os.environ.get(args.token_env) if args.token_env else None,
            )
        loop_kwargs = {}
        if args.fixed_clock:
            loop_kwargs["clock"] = lambda: args.fixed_clock
        result = run_generation_loop(
            problem.problem_id, obs, proposer, space,
            limits=limits, max_attempts=args.max_attempts, **loop_kwargs,
        )
        out = os.path.join(args.out_dir, f"{problem.problem_id}.transcript")
        meta = {"n": args.n, "seed": args.seed, "problems": args.problems,
                "space_file": args.space}
        write_transcript(result.transcript, out, meta=meta)
        print(
            f"{problem.problem_id}: {len(result.transcript.attempts)} attempts, "
            f"stop={result.transcript.stop_reason} -> {out}"
        )
        if result.transcript.stop_reason == "aborted":
            aborted.append(problem.problem_id)
    if aborted:
        print(
            f"aborted on proposer failure: {', '.join(aborted)} "
            "(transcripts retained, rerun to resume)",
            file=sys.stderr,
        )
        return EXIT_EXTERNAL
    return EXIT_OK


def _cmd_simulate(args) -> int:
    limits = _limits_from_args(args)
    runs = _problem_runs(args, limits)
    config = simulation.StudyConfig(
        m_values=tuple(args.m),
        repetitions=args.repetitions,
        context_sizes=tuple(args.context_sizes),
        contexts_per_size=args.contexts_per_size,
        seed=args.seed,
        limits=limits,
    )
    if args.study == "study1":
        cells = simulation.run_study1(runs, config)
        table = reports.study1_table(cells)
    else:
        cells, _ = simulation.run_study2(runs, config)
        table = reports.study2_table(cells)
    header = reports.comment_header({
        "study": args.study, "seed": args.seed, "repetitions": args.repetitions,
        "m": ",".join(str(m) for m in args.m),
    })
    reports.write_text(header + table, args.out)
    print(table, end="")
    return EXIT_OK


def _cmd_prefs(args) -> int:
    space = read_space(args.space)
    limits = _limits_from_args(args)
    problems = []
    for path in args.transcripts:
        transcript = read_transcript(path)
        result = rehydrate_loop_result(transcript, space, limits)
        problems.append(preferences.problem_from_loop_result(result))
    pairs, counts = preferences.build_preference_dataset(
        problems,
        context_sizes=tuple(args.context_sizes),
        contexts_per_size=args.contexts_per_size,
        seed=args.seed,
    )
    if args.balance:
        pairs = preferences.sample_balanced(pairs, args.balance, args.seed)
    preferences.write_pairs(pairs, args.out)
    if args.counts:
        preferences.write_counts(counts, args.counts)
    print(
        f"pairs: parsing={counts.parsing} consistency={counts.consistency} "
        f"score={counts.score} total={counts.total} -> {args.out}"
    )
    return EXIT_OK


def _cmd_curriculum_replay(args) -> int:
    params = curriculum.CurriculumParams(
        alpha=args.alpha,
        epsilon=args.epsilon,
        momentum_cap=args.momentum_cap,
        weight_min=args.weight_min,
        weight_max=args.weight_max,
        update_interval=args.update_interval,
    )
    records = curriculum.read_loss_log(args.log)
    trajectory = curriculum.replay_schedule(records, params)
    curriculum.write_trajectory(trajectory, params, args.out)
    print(f"{len(trajectory)} weight updates -> {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    space = read_space(args.space)
    limits = _limits_from_args(args)
    scores = []
    for path in args.transcripts:
        transcript = read_transcript(path)
        result = rehydrate_loop_result(transcript, space, limits)
        scores.append(reports.score_problem(result))
    meta = {"space": space.space_id, "transcripts": len(scores)}
    if args.format == "table-text":
        text = reports.comment_header(meta) + reports.scorecard_table(scores)
    else:
        text = reports.scorecard_records(scores, meta=meta)
    if args.out:
        reports.write_text(text, args.out)
    print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="abdeval", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-space", help="materialize a sample space file")
    p.add_argument("--family", required=True,
                   choices=["list-functions", "acre", "grid-corpus"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=1000, help="per-stratum cap")
    p.add_argument("--corpus", nargs="*", default=[],
                   help="grid-corpus source files or directories")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build_space)

    p = sub.add_parser("eval", help="evaluate hypotheses over a space")
    p.add_argument("--space", required=True)
    p.add_argument("--hypotheses", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    _add_limit_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("run", help="run the generation loop over problems")
    p.add_argument("--problems", required=True)
    p.add_argument("--problem-id", action="append", default=[])
    p.add_argument("--n", type=int, required=True,
                   help="observations shown to the proposer")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--require-both-labels", action="store_true",
                   help="force both on and off outputs into the sample")
    p.add_argument("--space", required=True)
    p.add_argument("--replies", help="scripted proposer replies file")
    p.add_argument("--endpoint-url", help="chat-completion endpoint base URL")
    p.add_argument("--model")
    p.add_argument("--token-env", default="ABDEVAL_PROPOSER_TOKEN",
                   help="environment variable holding the endpoint token")
    p.add_argument("--max-attempts", type=int, default=None)
    p.add_argument("--fixed-clock", default=None, metavar="ISO",
                   help="stamp attempts with this fixed timestamp so the "
                        "transcript bytes are reproducible")
    p.add_argument("--out-dir", required=True)
    _add_limit_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("simulate", help="run a validation study over transcripts")
    p.add_argument("study", choices=["study1", "study2"])
    p.add_argument("--transcripts", nargs="+", required=True)
    p.add_argument("--problems", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--dataset", default="dataset")
    p.add_argument("--m", type=int, nargs="+", default=[1, 2, 3, 4])
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--context-sizes", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--contexts-per-size", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_limit_flags(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("prefs", help="export preference pairs from transcripts")
    p.add_argument("--transcripts", nargs="+", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--context-sizes", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--contexts-per-size", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--balance", type=int, default=None,
                   help="sample this many pairs at a 1:1:1 stage ratio")
    p.add_argument("--out", required=True)
    p.add_argument("--counts")
    _add_limit_flags(p)
    p.set_defaults(func=_cmd_prefs)

    p = sub.add_parser("curriculum-replay", help="replay a probe-loss log")
    p.add_argument("--log", required=True)
    p.add_argument("--alpha", default="0.1")
    p.add_argument("--epsilon", default="0.1")
    p.add_argument("--momentum-cap", default="0.03")
    p.add_argument("--weight-min", default="0.8")
    p.add_argument("--weight-max", default="1.2")
    p.add_argument("--update-interval", type=int, default=1280)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_curriculum_replay)

    p = sub.add_parser("report", help="emit a scorecard from transcripts")
    p.add_argument("--transcripts", nargs="+", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--format", choices=["table-text", "line-records"],
                   default="table-text")
    p.add_argument("--out")
    _add_limit_flags(p)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ProposerTransportError, TransportError) as exc:
        print(f"external service failure: {exc}", file=sys.stderr)
        return EXIT_EXTERNAL
    except (CorpusError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
