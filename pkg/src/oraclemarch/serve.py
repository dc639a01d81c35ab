"""Interactive rendering endpoint.

HTTP GET /info returns checkpoint metadata; the WebSocket at /stream takes
JSON pose messages {id, pos: [x, y, z], yaw, pitch} and answers each with a
binary frame -- a 16-byte little-endian header (id u32, width u32, height
u32, flags u32; bit 0 = pose was clamped) followed by raw RGB8 pixels --
and a JSON meta message {type: "frame", id, clamped, render_ms, pose}.

Backpressure: at most one render is in flight per connection; when poses
arrive faster than rendering, only the newest pending pose is kept and the
displaced ones are acknowledged with {type: "superseded", id}. Poses outside
the view cell are clamped to its bounds and rotation limits. Malformed
messages produce {type: "error", ...} and leave the connection open.
"""
from __future__ import annotations

import asyncio
import contextlib
import os
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .checkpoint import Checkpoint, load_checkpoint
from .errors import OracleMarchError
from .geom import Pose, clamp_pose
from .metrics import pipeline_flops_per_pixel

FLAG_CLAMPED = 1


def create_app(ckpt: Checkpoint, resolution: tuple[int, int], workers: int = 2) -> FastAPI:
    if ckpt.shading_cfg is None:
        raise OracleMarchError("checkpoint has no shading network; train phase two first")
    if ckpt.pipeline.mode == "local-gt" and not ckpt.pipeline.use_oracle:
        raise OracleMarchError("local-gt checkpoints need ground-truth depth; cannot serve")
    pipeline = ckpt.build_pipeline()
    width, height = resolution
    app = FastAPI()
    app.state.executor = ThreadPoolExecutor(max_workers=workers)

    cell = ckpt.cell
    info = {
        "view_cell": cell.to_dict(),
        "resolution": [width, height],
        "fov_deg": ckpt.fov_deg,
        "samples": ckpt.pipeline.samples,
        "mode": ckpt.pipeline.mode,
        "mflop_per_pixel": pipeline_flops_per_pixel(ckpt) / 1e6,
        "depth_range": ckpt.depth_range.to_dict(),
    }

    @app.get("/info")
    def get_info():
        return info

    def render_frame(msg: dict) -> tuple[bytes, dict]:
        raw = Pose(
            position=[float(v) for v in msg["pos"]],
            yaw_deg=float(msg["yaw"]),
            pitch_deg=float(msg["pitch"]),
            fov_deg=ckpt.fov_deg,
        )
        pose, clamped = clamp_pose(cell, raw)
        start = time.perf_counter()
        img, _ = pipeline.render_image(pose, width, height)
        render_ms = (time.perf_counter() - start) * 1e3
        frame_id = int(msg["id"])
        flags = FLAG_CLAMPED if clamped else 0
        header = struct.pack("<IIII", frame_id, width, height, flags)
        pixels = (img * 255.0 + 0.5).astype(np.uint8).tobytes()
        meta = {
            "type": "frame",
            "id": frame_id,
            "clamped": clamped,
            "render_ms": render_ms,
            "pose": pose.to_dict(),
        }
        return header + pixels, meta

    @app.websocket("/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        loop = asyncio.get_running_loop()
        outbox: asyncio.Queue = asyncio.Queue()
        pending: list[dict | None] = [None]
        wakeup = asyncio.Event()

        async def sender():
            while True:
                kind, payload = await outbox.get()
                if kind == "bytes":
                    await ws.send_bytes(payload)
                else:
                    await ws.send_json(payload)

        async def renderer():
            while True:
                await wakeup.wait()
                wakeup.clear()
                msg = pending[0]
                if msg is None:
                    continue
                pending[0] = None
                try:
                    frame, meta = await loop.run_in_executor(
                        app.state.executor, render_frame, msg
                    )
                except (KeyError, TypeError, ValueError, OracleMarchError) as e:
                    await outbox.put(
                        ("json", {"type": "error", "id": msg.get("id"), "message": str(e)})
                    )
                    continue
                await outbox.put(("bytes", frame))
                await outbox.put(("json", meta))

        tasks = [asyncio.ensure_future(sender()), asyncio.ensure_future(renderer())]
        try:
            while True:
                try:
                    msg = await ws.receive_json()
                except (ValueError, KeyError):
                    await outbox.put(
                        ("json", {"type": "error", "id": None, "message": "malformed message"})
                    )
                    continue
                if not isinstance(msg, dict) or "id" not in msg:
                    await outbox.put(
                        ("json", {"type": "error", "id": None, "message": "missing id"})
                    )
                    continue
                displaced = pending[0]
                if displaced is not None:
                    await outbox.put(
                        ("json", {"type": "superseded", "id": displaced.get("id")})
                    )
                pending[0] = msg
                wakeup.set()
        except WebSocketDisconnect:
            pass
        finally:
            for task in tasks:
                task.cancel()
                with contextlib.suppress(asyncio.CancelledError):
                    await task

    viewer_dir = os.environ.get("ORACLEMARCH_VIEWER")
    if viewer_dir and Path(viewer_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=viewer_dir, html=True), name="viewer")
    return app


def run_server(ckpt_path: str, host: str, port: int, resolution: tuple[int, int]) -> None:
    import uvicorn

    app = create_app(load_checkpoint(ckpt_path), resolution)
    uvicorn.run(app, host=host, port=port, log_level="warning")
