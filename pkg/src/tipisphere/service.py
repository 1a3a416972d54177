"""Live interactive session over WebSocket, paced at the plant's tick rate.

One asyncio loop owns the simulation; connection handlers only enqueue
commands and receive broadcasts, so the state sequence stays a pure
function of (config, seed, step-stamped command sequence) and any live
session can be replayed through the batch runner.

Wire schema (all coordinates in meters, table-centered frame):
  server -> client: {"type": "state", "t", "x", "y", "heading", "vx",
                     "vy", "condition", "tipi", "xi_norm", "blocks": [...]}
  client -> server: {"type": "nudge", "x", "y", "jx", "jy"}
                    {"type": "block_on", "x1", "y1", "x2", "y2"}
                    {"type": "block_off", "id"}
                    {"type": "set_condition", "condition": "ada" | "rea"}
                    {"type": "pause"} | {"type": "resume"}
                    {"type": "reset", "seed"}
HTTP:  GET /health -> 200 "ok",  GET /config -> config echo,
       GET /snapshot -> current state + config echo.
"""

from __future__ import annotations

import asyncio
import contextlib
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse

from .errors import ConfigError
from .metrics import write_jsonl
from .session import Session, SessionConfig


def wire_state(session: Session) -> dict:
    st = session.state
    diag = session.last_diag
    return {
        "type": "state",
        "t": session.t,
        "x": st.x,
        "y": st.y,
        "heading": st.heading,
        "vx": st.vx,
        "vy": st.vy,
        "condition": session.condition,
        "tipi": float(diag.tipi),
        "xi_norm": float(diag.xi_norm),
        "blocks": [
            {"id": bid, "x1": seg[0][0], "y1": seg[0][1], "x2": seg[1][0], "y2": seg[1][1]}
            for bid, seg in session._blocks.items()
        ],
    }


class LiveSession:
    """Owns the session, the pause flag and the set of subscribers."""

    def __init__(self, cfg: SessionConfig, timeline: list[dict] | None = None,
                 out_dir=None):
        self.cfg = cfg
        self.session = Session(cfg, timeline=timeline)
        self.paused = False
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self._segment = 0
        self._clients: set[WebSocket] = set()

    # -- commands ---------------------------------------------------------

    def handle(self, msg: dict) -> dict | None:
        """Validate and enqueue one client message; an error reply dict is
        returned for bad messages, None when the command was accepted."""
        if not isinstance(msg, dict) or "type" not in msg:
            return {"type": "error", "error": "message must be an object with a type"}
        kind = msg["type"]
        if kind == "pause":
            self.paused = True
            self.session.submit({"kind": "pause"})
            return None
        if kind == "resume":
            self.paused = False
            self.session.submit({"kind": "resume"})
            return None
        if kind == "reset":
            seed = msg.get("seed", self.cfg.seed)
            if not isinstance(seed, int):
                return {"type": "error", "error": "reset seed must be an integer"}
            self.reset(seed)
            return None
        cmd = {k: v for k, v in msg.items() if k != "type"}
        cmd["kind"] = kind
        reason = self.session.validate_command(cmd)
        if reason is not None:
            return {"type": "error", "error": reason}
        self.session.submit(cmd)
        return None

    def reset(self, seed: int) -> None:
        self._write_segment()
        cfg_doc = self.cfg.__dict__ | {"seed": seed}
        self.cfg = SessionConfig(**cfg_doc)
        self.session = Session(self.cfg)
        self.paused = False

    def _write_segment(self) -> None:
        if self.out_dir is not None and self.session.t > 0:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            path = self.out_dir / f"live_seed{self.cfg.seed}_{self._segment:03d}.jsonl"
            write_jsonl(self.session.finalize(), path)
            self._segment += 1

    # -- loop -------------------------------------------------------------

    async def run_loop(self) -> None:
        dt = self.cfg.plant.dt
        loop = asyncio.get_running_loop()
        next_tick = loop.time()
        while True:
            if not self.paused and self.session.abort is None:
                self.session.tick()
            await self.broadcast(wire_state(self.session))
            next_tick += dt
            delay = next_tick - loop.time()
            if delay < 0:  # fell behind; don't try to catch up in a burst
                next_tick = loop.time()
                delay = 0.0
            await asyncio.sleep(delay)

    async def broadcast(self, msg: dict) -> None:
        dead = []
        for ws in self._clients:
            try:
                await ws.send_json(msg)
            except Exception:
                dead.append(ws)
        for ws in dead:
            self._clients.discard(ws)


def create_app(cfg: SessionConfig, timeline: list[dict] | None = None,
               out_dir=None) -> FastAPI:
    live = LiveSession(cfg, timeline=timeline, out_dir=out_dir)

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(live.run_loop())
        try:
            yield
        finally:
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task
            live._write_segment()

    app = FastAPI(lifespan=lifespan)
    app.state.live = live

    @app.get("/health")
    async def health() -> PlainTextResponse:
        return PlainTextResponse("ok")

    @app.get("/config")
    async def config() -> JSONResponse:
        return JSONResponse(live.cfg.echo())

    @app.get("/snapshot")
    async def snapshot() -> JSONResponse:
        return JSONResponse({"state": wire_state(live.session), "config": live.cfg.echo()})

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        live._clients.add(ws)
        try:
            while True:
                try:
                    msg = await ws.receive_json()
                except (ValueError, KeyError):
                    await ws.send_json({"type": "error", "error": "malformed JSON message"})
                    continue
                try:
                    reply = live.handle(msg)
                except ConfigError as exc:
                    reply = {"type": "error", "error": str(exc)}
                if reply is not None:
                    await ws.send_json(reply)
        except WebSocketDisconnect:
            pass
        finally:
            live._clients.discard(ws)

    return app


def serve(cfg: SessionConfig, host: str = "127.0.0.1", port: int = 8765,
          timeline: list[dict] | None = None, out_dir=None) -> None:
    """Run the live session server until interrupted."""
    import uvicorn

    app = create_app(cfg, timeline=timeline, out_dir=out_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
