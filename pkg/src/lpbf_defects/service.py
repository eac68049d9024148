"""JSON-over-HTTP inference service wrapping the core package.

``POST /predict`` accepts either a free-form prompt or structured
parameters and answers with defect labels, the prediction method, the parse
report, and the neighbors consulted. The index is immutable after startup,
so concurrent requests share it without locking; updating the index means
restarting with a new snapshot.
"""

from __future__ import annotations

import socket

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, ConfigDict

from .core import EmptyMaterial, PARAM_FIELDS, ProcessParameters, ToolkitError, canonicalize_material
from .parsing import Confidence, Lexicon, ParseResult, load_lexicon, parse_prompt
from .predictor import TrainIndex, predict


class BindFailure(ToolkitError):
    pass


class StructuredParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    material: str | None = None
    power_w: float | None = None
    velocity_mm_s: float | None = None
    beam_diameter_um: float | None = None
    hatch_spacing_um: float | None = None
    layer_height_um: float | None = None


class PredictRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    prompt: str | None = None
    params: StructuredParams | None = None


class LabelsOut(BaseModel):
    keyhole: bool
    lack_of_fusion: bool
    balling: bool
    none: bool


class NeighborOut(BaseModel):
    record_id: str
    distance: float


class ParsedOut(BaseModel):
    params: dict[str, float | str | None]
    confidence: dict[str, str]
    unmatched_spans: list[tuple[int, str]]


class PredictResponse(BaseModel):
    labels: LabelsOut
    method: str
    parsed: ParsedOut
    neighbors: list[NeighborOut]
    votes: dict[str, float] | None = None


_STRUCTURED_FIELDS = {
    "material": "material",
    "power_w": "power",
    "velocity_mm_s": "velocity",
    "beam_diameter_um": "beam_diameter",
    "hatch_spacing_um": "hatch_spacing",
    "layer_height_um": "layer_height",
}


def params_from_structured(structured: StructuredParams) -> ParseResult:
    """Wire-format fields to a parse report with Exact confidences."""
    values: dict[str, object] = {}
    confidence = {name: Confidence.MISSING for name in PARAM_FIELDS}
    for wire_name, field in _STRUCTURED_FIELDS.items():
        value = getattr(structured, wire_name)
        if value is None:
            continue
        if field == "material":
            value = canonicalize_material(str(value))
        values[field] = value
        confidence[field] = Confidence.EXACT
    return ParseResult(
        params=ProcessParameters(**values),  # type: ignore[arg-type]
        confidence=confidence,
        unmatched_spans=(),
    )


def _parsed_out(parsed: ParseResult) -> ParsedOut:
    data = parsed.to_dict()
    return ParsedOut(
        params=data["params"],
        confidence=data["confidence"],
        unmatched_spans=[(offset, text) for offset, text in data["unmatched_spans"]],
    )


def create_app(
    index: TrainIndex, lexicon: Lexicon | None = None, k: int = 5
) -> FastAPI:
    """Build the service around an immutable index and lexicon."""
    lexicon = lexicon or load_lexicon()
    app = FastAPI(
        title="Melt pool defect inference",
        description="Defect-regime prediction from process parameters or prompts",
        version="0.1.0",
    )

    @app.get("/health", response_class=PlainTextResponse)
    def health() -> str:
        return "ok"

    @app.post("/predict", response_model=PredictResponse)
    def predict_endpoint(request: PredictRequest) -> PredictResponse:
        if (request.prompt is None) == (request.params is None):
            raise HTTPException(
                status_code=400,
                detail="provide exactly one of 'prompt' or 'params'",
            )
        if request.prompt is not None:
            parsed = parse_prompt(request.prompt, lexicon)
            if not parsed.bound_fields():
                raise HTTPException(
                    status_code=422,
                    detail={
                        "error": "no process parameters found in prompt",
                        "parsed": parsed.to_dict(),
                    },
                )
        else:
            try:
                parsed = params_from_structured(request.params)
            except (ValueError, EmptyMaterial) as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            if not parsed.bound_fields():
                raise HTTPException(
                    status_code=422,
                    detail={
                        "error": "no process parameters provided",
                        "parsed": parsed.to_dict(),
                    },
                )
        prediction = predict(parsed.params, index, k)
        return PredictResponse(
            labels=LabelsOut(
                keyhole=prediction.labels.keyhole,
                lack_of_fusion=prediction.labels.lack_of_fusion,
                balling=prediction.labels.balling,
                none=prediction.labels.none,
            ),
            method=prediction.method.value,
            parsed=_parsed_out(parsed),
            neighbors=[
                NeighborOut(record_id=rid, distance=dist)
                for rid, dist in (prediction.neighbors or ())
            ],
            votes=None if prediction.votes is None else dict(prediction.votes),
        )

    return app


def serve(
    index: TrainIndex,
    lexicon: Lexicon | None = None,
    address: str = "127.0.0.1:8000",
    k: int = 5,
) -> None:
    """Run the service; raises :class:`BindFailure` if the address is taken."""
    import uvicorn

    host, _, port_text = address.partition(":")
    host = host or "127.0.0.1"
    port = int(port_text) if port_text else 8000

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
    finally:
        probe.close()

    app = create_app(index, lexicon, k)
    uvicorn.run(app, host=host, port=port, log_level="info")
