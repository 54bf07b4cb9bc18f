"""Session-hosting simulation service.

Exposes the hand model over HTTP (JSON, schema version 1) plus a
WebSocket push channel for pose/pressure frames.  Each session owns an
isolated pressure state and a simulated pneumatic clock; all simulation
results depend only on that clock, never on wall time.  Wall time paces
the stream and expires idle sessions — nothing else.
"""

from __future__ import annotations

import itertools
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import SoftHandError, ValidationError
from .hand import DEFAULT_CONFIG, PressureState, build_hand
from . import grasp as grasp_mod
from . import kinematics as kin
from . import pneumatics as pneu

SCHEMA_VERSION = 1
MAX_STREAM_RATE_HZ = 60.0
DEFAULT_SESSION_TIMEOUT_S = 600.0

#: Simulated time step per stream/state tick [s].
TICK_S = 1.0 / 30.0


class TargetsRequest(BaseModel):
    targets_kpa: list[float] | None = None
    duties: list[float] | None = None
    override: bool = False


class SessionRequest(BaseModel):
    config: dict | None = None
    coefficients: dict | None = None


class ScheduleRequest(BaseModel):
    feix_id: int | None = None
    schedule: dict | None = None


def _error_body(code, message, errors=None, field=None):
    body = {"v": SCHEMA_VERSION, "type": "error", "code": code,
            "message": message}
    if field is not None:
        body["field"] = field
    if errors is not None:
        body["errors"] = errors
    return body


@dataclass
class Session:
    """One isolated simulated hand with its own clock and regulator."""

    session_id: str
    hand: object
    coeffs: object
    cfg: pneu.PneumaticConfig
    state: PressureState
    targets: list
    limits: tuple
    lock: threading.Lock = field(default_factory=threading.Lock)
    seq: itertools.count = field(default_factory=itertools.count)
    last_access: float = field(default_factory=time.monotonic)
    override: bool = False
    object_proxy: object = None
    contacts: tuple = ()
    pending_events: list = field(default_factory=list)
    mutation_order: int = 0

    def touch(self):
        self.last_access = time.monotonic()

    def advance(self, dt=TICK_S):
        """Advance the simulated clock one tick (caller holds the lock)."""
        override = self.override and bool(self.contacts)
        duties = pneu.regulate_to_target(self.targets, self.state, self.cfg,
                                         limits=self._effective_limits(),
                                         override=override)
        self.state = pneu.step_averaged(self.state, duties, self.cfg, dt,
                                        limits=self._effective_limits())
        if self.object_proxy is not None:
            pose = kin.hand_pose(self.hand, self.state, self.coeffs)
            self.contacts = tuple(grasp_mod.detect_contacts(
                self.hand, pose, self.object_proxy, refine=False))

    def _effective_limits(self):
        limits = list(self.limits)
        if self.override and self.contacts:
            limits[self.hand.palm_bend_channel] = self.cfg.supply_pressure
            limits[self.hand.thumb_abduction_channel] = \
                self.cfg.supply_pressure
        return limits

    def frame(self):
        """Snapshot the current state as a stream frame (holds the lock)."""
        with self.lock:
            seq = next(self.seq)
            state = self.state
            pose = kin.hand_pose(self.hand, state, self.coeffs)
            contacts = self.contacts
            targets = list(self.targets)
        fingers = {}
        for role, frames in pose.finger_frames.items():
            tip_pos, _ = pose.fingertips[role]
            pts = kin.centerline(frames, (tip_pos, None))
            fingers[role] = {
                "centerline": [[round(float(v), 4) for v in p] for p in pts],
                "tip": [round(float(v), 4) for v in tip_pos],
            }
        return {
            "v": SCHEMA_VERSION,
            "type": "frame",
            "seq": seq,
            "time_s": round(state.timestamp_s, 6),
            "pressures_kpa": [round(float(p), 4)
                              for p in state.channel_pressures],
            "targets_kpa": [round(float(t), 4) for t in targets],
            "fingers": fingers,
            "palm": {
                "splay_deg": {k: round(float(v), 4)
                              for k, v in pose.palm_splay_angles.items()},
                "bend_deg": round(float(pose.palm_bend_angle), 4),
                "abduction_deg": round(float(pose.thumb_abduction_angle), 4),
            },
            "contacts": [{
                "position": [round(float(v), 4) for v in c.position],
                "normal": [round(float(v), 6) for c_v in [c.normal]
                           for v in c_v],
                "finger": c.finger_role,
                "segment": c.segment_index,
            } for c in contacts],
        }


class SessionStore:
    def __init__(self, timeout_s=DEFAULT_SESSION_TIMEOUT_S):
        self.timeout_s = timeout_s
        self._sessions = {}
        self._lock = threading.Lock()

    def expire_idle(self):
        now = time.monotonic()
        with self._lock:
            gone = [sid for sid, s in self._sessions.items()
                    if now - s.last_access > self.timeout_s]
            for sid in gone:
                del self._sessions[sid]

    def add(self, session):
        with self._lock:
            self._sessions[session.session_id] = session

    def get(self, sid):
        self.expire_idle()
        with self._lock:
            s = self._sessions.get(sid)
        if s is not None:
            s.touch()
        return s

    def remove(self, sid):
        with self._lock:
            return self._sessions.pop(sid, None)


def _validate_targets(session, req):
    """Per-channel validation; returns (targets list, error list)."""
    hand = session.hand
    n = hand.channel_count
    if (req.targets_kpa is None) == (req.duties is None):
        return None, [{"channel": None,
                       "reason": "provide exactly one of targets_kpa "
                       "or duties"}]
    if req.duties is not None:
        if len(req.duties) != n:
            return None, [{"channel": None,
                           "reason": f"expected {n} duties"}]
        bad = [{"channel": i, "reason": f"duty {d} outside [0, 1]"}
               for i, d in enumerate(req.duties) if not 0.0 <= d <= 1.0]
        if bad:
            return None, bad
        targets = [pneu.duty_to_steady_pressure(d, session.cfg)
                   for d in req.duties]
    else:
        if len(req.targets_kpa) != n:
            return None, [{"channel": None,
                           "reason": f"expected {n} targets"}]
        targets = [float(t) for t in req.targets_kpa]
    errors = []
    allow_over = req.override and bool(session.contacts)
    for i, t in enumerate(targets):
        if t < 0:
            errors.append({"channel": i, "reason": "negative pressure"})
        elif t > session.limits[i] and not allow_over:
            reason = (f"target {t} kPa exceeds safety limit "
                      f"{session.limits[i]} kPa")
            if req.override:
                reason += " (override requires an established contact)"
            errors.append({"channel": i, "reason": reason})
        elif t > session.cfg.supply_pressure:
            errors.append({"channel": i, "reason": "exceeds supply pressure"})
    return targets, errors


def create_app(hand=None, coeffs=None, session_timeout_s=None):
    """Build the service application (one store per app instance)."""
    default_hand = hand if hand is not None else build_hand()
    default_coeffs = coeffs if coeffs is not None else kin.load_coefficients()
    store = SessionStore(session_timeout_s if session_timeout_s is not None
                         else DEFAULT_SESSION_TIMEOUT_S)
    app = FastAPI(title="softhand service")
    app.state.store = store

    @app.exception_handler(SoftHandError)
    def _softhand_error(request, exc):
        return JSONResponse(status_code=422,
                            content=_error_body("validation", str(exc)))

    def _get_or_404(sid):
        session = store.get(sid)
        if session is None:
            return None, JSONResponse(
                status_code=404,
                content=_error_body("not_found", f"unknown session {sid}"))
        return session, None

    def _check_config_keys(config):
        for k in config:
            if k != "schema" and k not in DEFAULT_CONFIG:
                raise ValidationError(f"config.{k}", "unknown key")
        for sec in ("hand", "pneumatics"):
            for k in config.get(sec, {}) or {}:
                if k not in DEFAULT_CONFIG[sec]:
                    raise ValidationError(f"config.{sec}.{k}", "unknown key")

    @app.post("/v1/sessions")
    def create_session(req: SessionRequest):
        store.expire_idle()
        try:
            if req.config is not None:
                _check_config_keys(req.config)
            h = build_hand(req.config) if req.config is not None \
                else default_hand
            c = kin.coefficients_from_dict(req.coefficients) \
                if req.coefficients is not None else default_coeffs
        except ValidationError as exc:
            return JSONResponse(
                status_code=422,
                content=_error_body("validation", str(exc),
                                    field=exc.field))
        pn = dict(DEFAULT_CONFIG["pneumatics"])
        if req.config:
            pn.update(req.config.get("pneumatics", {}))
        cfg = pneu.PneumaticConfig.from_config({"pneumatics": pn})
        session = Session(
            session_id=uuid.uuid4().hex, hand=h, coeffs=c, cfg=cfg,
            state=PressureState.zeros(h.channel_count),
            targets=[0.0] * h.channel_count,
            limits=pneu.channel_limits(h))
        store.add(session)
        return {"v": SCHEMA_VERSION, "type": "session",
                "session_id": session.session_id,
                "channels": h.channel_count}

    @app.delete("/v1/sessions/{sid}")
    def delete_session(sid: str):
        if store.remove(sid) is None:
            return JSONResponse(
                status_code=404,
                content=_error_body("not_found", f"unknown session {sid}"))
        return {"v": SCHEMA_VERSION, "type": "deleted", "session_id": sid}

    @app.post("/v1/sessions/{sid}/targets")
    def set_targets(sid: str, req: TargetsRequest):
        session, err = _get_or_404(sid)
        if err is not None:
            return err
        with session.lock:
            targets, errors = _validate_targets(session, req)
            if errors:
                return JSONResponse(
                    status_code=422,
                    content=_error_body("limit_violation",
                                        "targets rejected", errors=errors))
            session.targets = targets
            session.override = req.override
            session.mutation_order += 1
            order = session.mutation_order
        return {"v": SCHEMA_VERSION, "type": "ack", "session_id": sid,
                "applied_kpa": [round(t, 6) for t in targets],
                "order": order}

    @app.get("/v1/sessions/{sid}/state")
    def get_state(sid: str):
        """Polling fallback: advances one simulated tick, returns a frame."""
        session, err = _get_or_404(sid)
        if err is not None:
            return err
        with session.lock:
            session.advance()
        return session.frame()

    @app.post("/v1/sessions/{sid}/schedule")
    def load_schedule(sid: str, req: ScheduleRequest):
        session, err = _get_or_404(sid)
        if err is not None:
            return err
        if (req.feix_id is None) == (req.schedule is None):
            return JSONResponse(
                status_code=422,
                content=_error_body("validation",
                                    "provide exactly one of feix_id "
                                    "or schedule"))
        try:
            if req.feix_id is not None:
                if not 1 <= req.feix_id <= grasp_mod.FEIX_COUNT:
                    raise ValidationError(
                        "feix_id", f"must be 1..{grasp_mod.FEIX_COUNT}")
                schedule = next(s for s in grasp_mod.feix_library()
                                if s.feix_id == req.feix_id)
            else:
                schedule = grasp_mod.schedule_from_dict(req.schedule)
        except ValidationError as exc:
            return JSONResponse(
                status_code=422,
                content=_error_body("validation", str(exc),
                                    field=exc.field))
        execution_id = uuid.uuid4().hex
        with session.lock:
            traj = grasp_mod.execute_schedule(session.hand, schedule,
                                              coeffs=session.coeffs,
                                              cfg=session.cfg)
            last = traj[-1]
            outcome = grasp_mod.judge_contacts(schedule, last.contacts)
            session.state = last.state
            session.targets = list(last.state.channel_pressures)
            session.object_proxy = schedule.object_proxy
            session.contacts = last.contacts
            session.mutation_order += 1
            for i, phase in enumerate(schedule.phases):
                session.pending_events.append({
                    "v": SCHEMA_VERSION, "type": "progress",
                    "execution_id": execution_id,
                    "phase": i + 1, "phases": len(schedule.phases),
                })
            session.pending_events.append({
                "v": SCHEMA_VERSION, "type": "outcome",
                "execution_id": execution_id,
                "feix_id": outcome.feix_id,
                "name": outcome.name,
                "contacts": len(outcome.contacts),
                "closure_quality": round(outcome.closure_quality, 9),
                "shake_pass": outcome.shake_pass,
                "failure_reason": outcome.failure_reason.value
                if outcome.failure_reason else None,
                "passed": outcome.passed,
            })
        return {"v": SCHEMA_VERSION, "type": "execution",
                "execution_id": execution_id,
                "phases": len(schedule.phases),
                "passed": outcome.passed,
                "failure_reason": outcome.failure_reason.value
                if outcome.failure_reason else None}

    @app.websocket("/v1/sessions/{sid}/stream")
    async def stream(ws: WebSocket, sid: str, rate: float = 30.0):
        await ws.accept()
        if not 0.0 < rate <= MAX_STREAM_RATE_HZ:
            await ws.send_json(_error_body(
                "validation", f"rate must be in (0, {MAX_STREAM_RATE_HZ}]"))
            await ws.close()
            return
        import asyncio
        period = 1.0 / rate
        next_tick = time.monotonic()
        try:
            while True:
                session = store.get(sid)
                if session is None:
                    await ws.send_json(_error_body(
                        "session_gone", f"session {sid} expired or deleted"))
                    break
                with session.lock:
                    session.advance()
                    events = session.pending_events
                    session.pending_events = []
                for ev in events:
                    await ws.send_json(ev)
                await ws.send_json(session.frame())
                next_tick += period
                delay = next_tick - time.monotonic()
                if delay > 0:
                    await asyncio.sleep(delay)
        except WebSocketDisconnect:
            return
        await ws.close()

    return app


def serve(port=8080, hand=None, coeffs=None, host="127.0.0.1"):
    """Run the service under uvicorn (blocking)."""
    import uvicorn
    app = create_app(hand=hand, coeffs=coeffs)
    uvicorn.run(app, host=host, port=port, log_level="warning")
