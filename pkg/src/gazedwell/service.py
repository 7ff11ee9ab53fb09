"""FastAPI service around the core package.

Exposes the session gateway as a WebSocket (`/session`, protocol gdw/1) for
streaming clients, plus stateless REST endpoints for one-shot segmentation,
intent inference and dwell assignment.  When a built demo front end is
available its directory is mounted at the web root.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import __version__
from .intent import IntentModelParams, forward_posterior, last_fixated_baseline
from .policy import PolicyParams, assign_dwells, parse_policy
from .protocol import PROTOCOL_VERSION, GatewaySession, SessionConfig
from .segmentation import (FixationEvent, GazeSample, SegModelParams, extract_fixations,
                           viterbi_labels)
from .traceio import layout_from_obj, load_default_params
from .units import TS_MS


# -- request/response schemas -------------------------------------------------

class LinkModel(BaseModel):
    id: int
    left: float
    top: float
    width: float
    height: float
    label: Optional[str] = None


class ButtonModel(BaseModel):
    command: str
    left: float
    top: float
    width: float
    height: float


class LayoutModel(BaseModel):
    screen: tuple[float, float]
    links: list[LinkModel]
    buttons: Optional[list[ButtonModel]] = None


class SegmentRequest(BaseModel):
    trace: list[tuple[int, float, float]] = Field(description="[t, x, y] samples at 60 Hz")


class FixationModel(BaseModel):
    x: float
    y: float
    duration_ms: float
    start_index: int
    end_index: int


class SegmentResponse(BaseModel):
    labels: list[str]
    fixations: list[FixationModel]


class InferRequest(BaseModel):
    layout: LayoutModel
    trace: Optional[list[tuple[int, float, float]]] = None
    fixations: Optional[list[FixationModel]] = None


class InferResponse(BaseModel):
    posterior: list[float]
    argmax_link: int
    last_fixated_link: Optional[int]


class DwellsRequest(BaseModel):
    posterior: list[float]
    policy: Optional[str] = Field(default=None, description="tmax,tmin,tbreak,pbreak in ms")
    quantize: Optional[str] = None


class DwellEntry(BaseModel):
    id: int
    n: int
    t_ms: float
    p: float


class DwellsResponse(BaseModel):
    links: list[DwellEntry]


def _layout_from_model(model: LayoutModel):
    return layout_from_obj(model.model_dump(exclude_none=True))


def create_app(seg_params: Optional[SegModelParams] = None,
               intent_params: Optional[IntentModelParams] = None,
               policy: Optional[PolicyParams] = None,
               quantize: str = "per-sample",
               include_posterior: bool = True,
               consecutive_buttons: bool = False,
               frontend_dir: Optional[str] = None) -> FastAPI:
    if seg_params is None or intent_params is None:
        bundle = load_default_params()
        seg_params = seg_params or bundle.seg
        intent_params = intent_params or bundle.intent
    policy = policy or PolicyParams(500.0, 100.0, 100.0, 1.0)

    app = FastAPI(title="gazedwell", version=__version__)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "protocol": PROTOCOL_VERSION,
                "policy": policy.as_literal(), "quantize": quantize}

    @app.post("/segment", response_model=SegmentResponse)
    def segment(req: SegmentRequest):
        if len(req.trace) < 3:
            raise HTTPException(422, "need at least 3 samples")
        trace = [GazeSample(t, x, y) for t, x, y in req.trace]
        try:
            labels = viterbi_labels(trace, seg_params)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from None
        fixations = extract_fixations(trace, labels)
        return SegmentResponse(
            labels=[l.name.lower() for l in labels],
            fixations=[FixationModel(x=f.x, y=f.y, duration_ms=f.duration_ms,
                                     start_index=f.start_index, end_index=f.end_index)
                       for f in fixations],
        )

    @app.post("/infer", response_model=InferResponse)
    def infer(req: InferRequest):
        try:
            layout, _ = _layout_from_model(req.layout)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from None
        if req.fixations:
            scanpath = [FixationEvent(f.x, f.y, f.duration_ms, f.start_index, f.end_index)
                        for f in req.fixations]
        elif req.trace and len(req.trace) >= 3:
            trace = [GazeSample(t, x, y) for t, x, y in req.trace]
            try:
                scanpath = extract_fixations(trace, viterbi_labels(trace, seg_params))
            except ValueError as exc:
                raise HTTPException(422, str(exc)) from None
        else:
            raise HTTPException(422, "need either fixations or a trace of >= 3 samples")
        if not scanpath:
            raise HTTPException(422, "no usable fixation in the trace")
        posterior = forward_posterior(scanpath, layout, intent_params)
        return InferResponse(
            posterior=[float(p) for p in posterior.probs],
            argmax_link=posterior.argmax_link,
            last_fixated_link=last_fixated_baseline(scanpath, layout),
        )

    @app.post("/dwells", response_model=DwellsResponse)
    def dwells(req: DwellsRequest):
        try:
            pol = parse_policy(req.policy) if req.policy else policy
            assignment = assign_dwells(req.posterior, pol, req.quantize or quantize)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from None
        return DwellsResponse(links=[
            DwellEntry(id=i + 1, n=n, t_ms=round(n * TS_MS, 4), p=float(req.posterior[i]))
            for i, n in enumerate(assignment.n_samples)
        ])

    @app.websocket("/session")
    async def session(ws: WebSocket):
        await ws.accept()
        sess = GatewaySession(seg_params, intent_params,
                              SessionConfig(policy=policy, quantize=quantize,
                                            include_posterior=include_posterior,
                                            consecutive_buttons=consecutive_buttons))
        try:
            while True:
                text = await ws.receive_text()
                frames, close = sess.handle_text(text)
                for frame in frames:
                    await ws.send_text(frame)
                if close:
                    await ws.close()
                    return
        except WebSocketDisconnect:
            return

    if frontend_dir and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="demo")

    return app
