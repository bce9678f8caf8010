"""Session-oriented HTTP service exposing live dialogues to UIs and drivers.

Endpoints: POST /sessions, POST /sessions/{id}/messages,
GET /sessions/{id}/transcript, GET /sessions/{id}/events (SSE). Events are
message-granular and mirror the transcript order exactly.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from fastapi import Depends, FastAPI, Header, HTTPException
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from .backend import BackendError, BackendRegistry
from .core import RunConfig, Termination
from .orchestrator import BudgetExceeded, ExchangeEvent, Orchestrator, detect_loop
from .worldenv import WorldDatabase

log = logging.getLogger(__name__)


class SessionStatus(str, Enum):
    AWAITING_USER = "awaiting_user"
    WORKING = "working"
    ENDED = "ended"


@dataclass
class Session:
    id: str
    config: RunConfig
    orchestrator: Orchestrator
    state: object  # OrchestratorState
    status: SessionStatus = SessionStatus.AWAITING_USER
    ended_reason: Optional[Termination] = None
    events: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)
    new_event: threading.Condition = field(default_factory=threading.Condition)

    def push_event(self, event: dict) -> None:
        with self.new_event:
            self.events.append(event)
            self.new_event.notify_all()


class CreateSessionBody(BaseModel):
    config: dict


class UserMessageBody(BaseModel):
    text: str


def _event_from_exchange(event: ExchangeEvent, turn: int) -> dict:
    out: dict = {"type": event.kind, "text": event.text, "turn": turn}
    if event.level is not None:
        out["level"] = event.level.value
    if event.domain is not None:
        out["domain"] = event.domain.value
    return out


class SessionService:
    """Owns live sessions; steps within a session are serialized by its lock."""

    def __init__(self, registry: BackendRegistry, db: WorldDatabase, state_dir: Optional[str] = None):
        self.registry = registry
        self.db = db
        self.state_dir = state_dir
        self.sessions: dict[str, Session] = {}
        if state_dir:
            os.makedirs(state_dir, exist_ok=True)
            self._restore_sessions()

    def _restore_sessions(self) -> None:
        """Rebuild sessions persisted before a restart; transcripts stay prefix-consistent."""
        from .core import Message, Transcript

        for path in sorted(os.listdir(self.state_dir)):
            if not path.startswith("session-") or not path.endswith(".jsonl"):
                continue
            with open(os.path.join(self.state_dir, path), encoding="utf-8") as fh:
                records = [json.loads(line) for line in fh if line.strip()]
            if not records or records[0].get("record") != "session":
                continue
            head = records[0]
            try:
                config = RunConfig.from_dict(head["config"])
                orchestrator = Orchestrator(config, self.registry, self.db)
            except (KeyError, ValueError) as exc:
                log.warning("not restoring session %s: %s", head.get("id"), exc)
                continue
            messages = tuple(
                Message.from_dict(r) for r in records if r.get("record") == "message"
            )
            events = [
                {k: v for k, v in r.items() if k != "record"}
                for r in records
                if r.get("record") == "event"
            ]
            state = orchestrator.new_state(seed=config.seed + len(messages))
            state.transcript = Transcript(messages=messages)
            state.exchanges_used = state.transcript.exchanges
            ended = next((e for e in events if e.get("type") == "ended"), None)
            session = Session(
                id=head["id"],
                config=config,
                orchestrator=orchestrator,
                state=state,
                status=SessionStatus.ENDED if ended else SessionStatus.AWAITING_USER,
                ended_reason=Termination(ended["text"]) if ended else None,
                events=events,
            )
            self.sessions[session.id] = session

    def create_session(self, config_data: dict) -> Session:
        try:
            config = RunConfig.from_dict(config_data)
            orchestrator = Orchestrator(config, self.registry, self.db)
        except (KeyError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=f"invalid config: {exc}")
        session_id = uuid.uuid4().hex
        session = Session(
            id=session_id,
            config=config,
            orchestrator=orchestrator,
            state=orchestrator.new_state(),
        )
        self.sessions[session_id] = session
        self._persist(session, {"record": "session", "id": session_id, "config": config.to_dict()})
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="no such session")
        return session

    def _persist(self, session: Session, record: dict) -> None:
        if not self.state_dir:
            return
        path = os.path.join(self.state_dir, f"session-{session.id}.jsonl")
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def post_user_message(self, session_id: str, text: str) -> dict:
        session = self.get(session_id)
        with session.lock:
            if session.status is not SessionStatus.AWAITING_USER:
                raise HTTPException(status_code=409, detail=f"session is {session.status.value}")
            session.status = SessionStatus.WORKING
            state = session.state
            base_messages = len(state.transcript.messages)
            user_event = {"type": "user", "text": text, "turn": state.transcript.next_turn_index}
            try:
                exchange = session.orchestrator.run_exchange(state, text)
            except BudgetExceeded:
                session.status = SessionStatus.ENDED
                session.ended_reason = Termination.TURN_BUDGET_EXCEEDED
                ended = {"type": "ended", "text": Termination.TURN_BUDGET_EXCEEDED.value, "turn": state.transcript.next_turn_index}
                session.push_event(user_event)
                session.push_event(ended)
                self._persist(session, {"record": "event", **ended})
                return ended
            except BackendError as exc:
                # surfaced, but the session stays resumable
                session.status = SessionStatus.AWAITING_USER
                raise HTTPException(status_code=502, detail=f"backend error: {exc}")
            for message in state.transcript.messages[base_messages:]:
                self._persist(session, {"record": "message", **message.to_dict()})
            session.push_event(user_event)
            self._persist(session, {"record": "event", **user_event})
            system_turn = state.transcript.messages[-1].turn_index
            event = _event_from_exchange(exchange, system_turn)
            session.push_event(event)
            self._persist(session, {"record": "event", **event})

            config = session.config
            ended_reason: Optional[Termination] = None
            if detect_loop(state.transcript, config.loop_window):
                ended_reason = Termination.LOOP_DETECTED
            elif state.exchanges_used >= config.max_exchanges:
                ended_reason = Termination.TURN_BUDGET_EXCEEDED
            if ended_reason is not None:
                session.status = SessionStatus.ENDED
                session.ended_reason = ended_reason
                state.transcript = state.transcript.finish(ended_reason)
                ended = {"type": "ended", "text": ended_reason.value, "turn": state.transcript.next_turn_index}
                session.push_event(ended)
                self._persist(session, {"record": "event", **ended})
            else:
                session.status = SessionStatus.AWAITING_USER
            return event

    def transcript_payload(self, session_id: str) -> dict:
        session = self.get(session_id)
        state = session.state
        return {
            "id": session.id,
            "status": session.status.value,
            "terminated": session.ended_reason.value if session.ended_reason else None,
            "mode": session.config.mode.value,
            "messages": [m.to_dict() for m in state.transcript.messages],
        }

    def event_stream(self, session_id: str):
        session = self.get(session_id)
        index = 0
        while True:
            with session.new_event:
                while index >= len(session.events) and session.status is not SessionStatus.ENDED:
                    session.new_event.wait(timeout=0.5)
                pending = session.events[index:]
                index += len(pending)
                ended = session.status is SessionStatus.ENDED
            for event in pending:
                yield f"data: {json.dumps(event, sort_keys=True)}\n\n"
            if ended and index >= len(session.events):
                return


def create_app(
    registry: BackendRegistry,
    db: WorldDatabase,
    state_dir: Optional[str] = None,
    bearer_token: Optional[str] = None,
) -> FastAPI:
    app = FastAPI(title="clariflow service")
    service = SessionService(registry, db, state_dir)
    app.state.service = service

    def check_auth(authorization: Optional[str] = Header(default=None)) -> None:
        if bearer_token and authorization != f"Bearer {bearer_token}":
            raise HTTPException(status_code=401, detail="missing or bad bearer token")

    @app.post("/sessions", dependencies=[Depends(check_auth)])
    def create_session(body: CreateSessionBody) -> dict:
        session = service.create_session(body.config)
        return {"id": session.id, "status": session.status.value}

    @app.post("/sessions/{session_id}/messages", dependencies=[Depends(check_auth)])
    def post_message(session_id: str, body: UserMessageBody) -> dict:
        return service.post_user_message(session_id, body.text)

    @app.get("/sessions/{session_id}/transcript", dependencies=[Depends(check_auth)])
    def get_transcript(session_id: str) -> dict:
        return service.transcript_payload(session_id)

    @app.get("/sessions/{session_id}/events", dependencies=[Depends(check_auth)])
    def get_events(session_id: str) -> StreamingResponse:
        service.get(session_id)
        return StreamingResponse(service.event_stream(session_id), media_type="text/event-stream")

    return app
