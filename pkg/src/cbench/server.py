"""HTTP API over the workspace stores.

All read endpoints are side-effect-free; errors come back as
problem-document JSON with status 400, 404 or 503.  The dashboard asset
bundle, when built, is served from the root path.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Optional, Union

from fastapi import FastAPI, Request
from fastapi.responses import HTMLResponse, JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from . import pipeline
from .analysis import RegressionConfig
from .tsdb import (
    MAX_TIME,
    MIN_TIME,
    InvalidQuery,
    ParseError,
    Query,
    QueryGroup,
    parse_line,
)
from .workspace import StoreUnavailable, Workspace

API_PREFIX = "/api/v1"

BIND_ENV = "CB_BIND"
DEFAULT_BIND = "127.0.0.1:8610"

_DASHBOARD_CANDIDATES = (
    Path(__file__).resolve().parent.parent.parent / "frontend" / "dist",
    Path("frontend/dist"),
)


def problem(status: int, title: str, detail: str = "") -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"title": title, "status": status, "detail": detail},
        media_type="application/problem+json",
    )


def query_groups_payload(groups: list[QueryGroup]) -> dict:
    out = []
    for g in groups:
        entry: dict = {"tags": dict(g.group)}
        if g.points is not None:
            entry["points"] = [[ts, fields] for ts, fields in g.points]
        if g.value is not None:
            entry["value"] = g.value
        out.append(entry)
    return {"groups": out}


def create_app(
    workspace: Workspace, dashboard_dist: Optional[Union[str, Path]] = None
) -> FastAPI:
    app = FastAPI(title="cbench", docs_url=None, redoc_url=None)

    @app.exception_handler(StoreUnavailable)
    async def _store_unavailable(request: Request, exc: StoreUnavailable):
        return problem(503, "store unavailable", str(exc))

    @app.post(API_PREFIX + "/ingest")
    async def ingest(request: Request):
        body = (await request.body()).decode("utf-8", errors="replace")
        lines = [line for line in body.splitlines() if line.strip()]
        points = []
        for lineno, line in enumerate(lines, start=1):
            try:
                points.append(parse_line(line))
            except ParseError as exc:
                return problem(400, "bad line protocol", f"line {lineno}: {exc}")
        for point in points:  # parse everything first so ingestion is all-or-nothing
            workspace.tsdb.ingest(point)
        return {"ingested": len(points)}

    @app.post(API_PREFIX + "/query")
    async def query(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError as exc:
            return problem(400, "bad JSON body", str(exc))
        try:
            time_range = body.get("time_range")
            q = Query(
                measurement=body.get("measurement", ""),
                tag_filters=body.get("tag_filters", {}),
                group_by=tuple(body.get("group_by", ())),
                time_range=(
                    (int(time_range[0]), int(time_range[1]))
                    if time_range
                    else (MIN_TIME, MAX_TIME)
                ),
                aggregate=body.get("aggregate", "none"),
                field_name=body.get("field"),
            )
        except (InvalidQuery, TypeError, ValueError) as exc:
            return problem(400, "invalid query", str(exc))
        return query_groups_payload(workspace.tsdb.query(q))

    @app.get(API_PREFIX + "/hosts")
    async def hosts():
        return {"hosts": [p.to_dict() for _, p in sorted(workspace.hosts().items())]}

    @app.get(API_PREFIX + "/runs")
    async def runs():
        out = []
        for run_id in workspace.run_ids():
            doc = workspace.load_run(run_id)
            if doc is None:
                continue
            out.append(
                {
                    "run_id": doc["run_id"],
                    "commit_id": doc["commit_id"],
                    "triggered_at": doc["triggered_at"],
                    "spec_names": doc.get("spec_names", []),
                    "hosts": doc.get("hosts", []),
                    "job_count": len(doc.get("job_statuses", {})),
                }
            )
        return {"runs": out}

    @app.get(API_PREFIX + "/runs/{run_id}")
    async def run_detail(run_id: str):
        doc = workspace.load_run(run_id)
        if doc is None:
            return problem(404, "unknown run", run_id)
        return doc

    @app.get(API_PREFIX + "/analysis/roofline")
    async def roofline(run: str):
        doc = workspace.load_run(run)
        if doc is None:
            return problem(404, "unknown run", run)
        return pipeline.roofline_data(workspace, doc)

    @app.get(API_PREFIX + "/analysis/timeshare")
    async def timeshare(run: str):
        doc = workspace.load_run(run)
        if doc is None:
            return problem(404, "unknown run", run)
        return pipeline.timeshare_data(workspace, doc)

    @app.get(API_PREFIX + "/analysis/regressions")
    async def regressions(
        metric: str,
        window: int = pipeline.DEFAULT_REGRESSION_CFG.window,
        threshold: float = pipeline.DEFAULT_REGRESSION_CFG.threshold_fraction,
        direction: Optional[str] = None,
    ):
        measurement, _, field_name = metric.partition(".")
        if not measurement or not field_name:
            return problem(400, "invalid metric", "expected <measurement>.<field>")
        if direction is None:
            direction = next(
                (
                    d
                    for m, f, d in pipeline.TRACKED_METRICS
                    if m == measurement and f == field_name
                ),
                "higher-is-better",
            )
        try:
            cfg = RegressionConfig(
                window=window, threshold_fraction=threshold, direction=direction
            )
        except ValueError as exc:
            return problem(400, "invalid regression config", str(exc))
        entries = pipeline.regressions_for_metric(
            workspace, measurement, field_name, direction, cfg
        )
        return {"metric": metric, "groups": entries}

    dist = Path(dashboard_dist) if dashboard_dist else None
    if dist is None:
        for candidate in _DASHBOARD_CANDIDATES:
            if candidate.is_dir():
                dist = candidate
                break
    if dist is not None and dist.is_dir():
        app.mount("/", StaticFiles(directory=str(dist), html=True), name="dashboard")
    else:

        @app.get("/", response_class=HTMLResponse)
        async def index():
            return (
                "<html><body><h1>cbench</h1>"
                f"<p>API under {API_PREFIX}; dashboard bundle not built.</p>"
                "</body></html>"
            )

    return app


def serve(workspace: Workspace, bind: Optional[str] = None) -> None:
    import uvicorn

    bind = bind or os.environ.get(BIND_ENV) or DEFAULT_BIND
    host, _, port = bind.rpartition(":")
    uvicorn.run(create_app(workspace), host=host or "127.0.0.1", port=int(port))
