"""Command-line entry points: chat, simulate, eval, datagen, serve."""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import sys
from dataclasses import replace
from typing import Optional

from .backend import BackendError, load_backend_config
from .core import Mode, RunConfig, UserGoal, transcript_to_jsonl, validate_goal
from .evalkit import InvalidGeneration, generate_clarified_dialogue, rule_check_judge, run_ablation
from .orchestrator import Orchestrator
from .simulator import LlmUser, SimulatorPersona, goal_from_multiwoz
from .worldenv import SchemaError, load_database

log = logging.getLogger(__name__)

_MODE_FLAGS = {
    "none": Mode.NO_CLARIFY,
    "expert": Mode.EXPERT_ONLY,
    "supervisor": Mode.SUPERVISOR_ONLY,
    "both": Mode.BOTH,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clariflow", description="Clarifying multi-agent dialogue runner")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, *, goals: bool = True) -> None:
        p.add_argument("--db", required=True, help="directory with per-domain *_db.json files")
        p.add_argument("--backend-config", required=True, help="TOML/JSON backend bindings")
        p.add_argument("--mode", choices=sorted(_MODE_FLAGS) + ["all"], default="both")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--max-turns", type=int, default=20, help="exchange budget per dialogue")
        if goals:
            p.add_argument("--goals", required=True, help="goal JSON file or directory")

    chat = sub.add_parser("chat", help="interactive terminal session")
    common(chat, goals=False)

    simulate = sub.add_parser("simulate", help="run simulated dialogues over goal files")
    common(simulate)
    simulate.add_argument("--out", required=True, help="output directory for transcripts")
    simulate.add_argument("--underspec", type=float, default=0.5, help="slot withholding rate")

    evalp = sub.add_parser("eval", help="run the clarification-mode grid and report metrics")
    common(evalp)
    evalp.add_argument("--out", required=True, help="output directory for reports")
    evalp.add_argument("--runs", type=int, default=5, help="repetitions per cell")
    evalp.add_argument("--underspec", type=float, default=0.5)
    evalp.add_argument("--workers", type=int, default=4, help="concurrent dialogues per cell")

    datagen = sub.add_parser("datagen", help="rewrite conversations to include clarifications")
    datagen.add_argument("--backend-config", required=True)
    datagen.add_argument("--in", dest="input", required=True, help="JSON: [{goal, conversation}]")
    datagen.add_argument("--out", required=True)

    serve = sub.add_parser("serve", help="start the HTTP session service")
    serve.add_argument("--db", required=True)
    serve.add_argument("--backend-config", required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--state-dir", default=None)
    serve.add_argument("--token-env", default=None, help="env var holding the bearer token")

    return parser


def _load_goals(path: str) -> list[UserGoal]:
    paths = sorted(glob.glob(os.path.join(path, "*.json"))) if os.path.isdir(path) else [path]
    goals = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            doc = json.load(fh)
        goal = goal_from_multiwoz(doc) if "domains" not in doc else UserGoal.from_dict(doc)
        problems = validate_goal(goal)
        if problems:
            log.warning("goal %s has issues: %s", goal.goal_id, ", ".join(str(v) for v in problems))
        goals.append(goal)
    return goals


def _base_config(args, roles: dict[str, str], mode: Mode) -> RunConfig:
    return RunConfig(
        mode=mode,
        backends=roles,
        max_exchanges=args.max_turns,
        seed=args.seed,
        repetitions=getattr(args, "runs", 5),
    )


def _cmd_chat(args) -> int:
    registry, roles = load_backend_config(args.backend_config)
    db = load_database(args.db)
    config = _base_config(args, roles, _MODE_FLAGS[args.mode])
    orchestrator = Orchestrator(config, registry, db)
    state = orchestrator.new_state()
    print(f"mode: {config.mode.value}. Type your request; Ctrl-D to quit.")
    while state.exchanges_used < config.max_exchanges:
        try:
            text = input("you> ").strip()
        except EOFError:
            print()
            break
        if not text:
            continue
        event = orchestrator.run_exchange(state, text)
        if event.kind == "clarify":
            who = event.level.value if event.level else "agent"
            if event.domain is not None:
                who = f"{event.domain.value} expert"
            print(f"[{who} asks] {event.text}")
        else:
            print(f"assistant> {event.text}")
    return 0


def _cmd_simulate(args) -> int:
    registry, roles = load_backend_config(args.backend_config)
    db = load_database(args.db)
    goals = _load_goals(args.goals)
    os.makedirs(args.out, exist_ok=True)
    config = _base_config(args, roles, _MODE_FLAGS[args.mode])
    orchestrator = Orchestrator(config, registry, db)
    for goal in goals:
        persona = SimulatorPersona(goal, underspecification_rate=args.underspec)
        user = LlmUser(persona, registry.make(config.backend_for("simulator")), seed=config.seed)
        transcript = orchestrator.run_dialogue(user, goal=goal, seed=config.seed)
        out_path = os.path.join(args.out, f"{goal.goal_id}.jsonl")
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(transcript_to_jsonl(transcript, mode=config.mode, seed=config.seed))
        status = transcript.terminated.value if transcript.terminated else "unknown"
        print(f"{goal.goal_id}: {status} after {transcript.exchanges} exchanges -> {out_path}")
    return 0


def _cmd_eval(args) -> int:
    registry, roles = load_backend_config(args.backend_config)
    db = load_database(args.db)
    goals = _load_goals(args.goals)
    os.makedirs(args.out, exist_ok=True)
    modes = list(Mode) if args.mode == "all" else [_MODE_FLAGS[args.mode]]

    def run_one(mode: Mode, goal: UserGoal, rep: int):
        config = replace(_base_config(args, roles, mode), seed=args.seed + rep)
        orchestrator = Orchestrator(config, registry, db)
        persona = SimulatorPersona(goal, underspecification_rate=args.underspec)
        user = LlmUser(persona, registry.make(config.backend_for("simulator")), seed=config.seed)
        transcript = orchestrator.run_dialogue(user, goal=goal, seed=config.seed)
        judgment = rule_check_judge(goal, transcript)
        return transcript, judgment.success

    reports = run_ablation(modes, goals, args.runs, run_one, out_dir=args.out, workers=args.workers)
    for report in reports:
        mean, std = report.avg_at_k
        print(
            f"{report.mode.value}: max@{args.runs}={report.max_at_k:.3f} "
            f"avg@{args.runs}={mean:.3f}±{std:.3f} turns={report.average_exchanges:.2f}"
        )
    return 0


def _cmd_datagen(args) -> int:
    registry, roles = load_backend_config(args.backend_config)
    backend_name = roles.get("datagen") or roles.get("judge") or next(iter(roles.values()))
    with open(args.input, encoding="utf-8") as fh:
        items = json.load(fh)
    outputs = []
    for item in items:
        backend = registry.make(backend_name)
        try:
            turns = generate_clarified_dialogue(
                json.dumps(item["goal"], ensure_ascii=False), item["conversation"], backend
            )
            outputs.append(turns)
        except InvalidGeneration as exc:
            print(f"rejected: {exc}", file=sys.stderr)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(outputs, fh, ensure_ascii=False, indent=1)
    print(f"wrote {len(outputs)} of {len(items)} conversations -> {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    registry, roles = load_backend_config(args.backend_config)
    db = load_database(args.db)
    token = os.environ.get(args.token_env, "") if args.token_env else None
    app = create_app(registry, db, state_dir=args.state_dir, bearer_token=token or None)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "chat": _cmd_chat,
    "simulate": _cmd_simulate,
    "eval": _cmd_eval,
    "datagen": _cmd_datagen,
    "serve": _cmd_serve,
}


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("CLARIFLOW_LOG", "WARNING"))
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 2
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
