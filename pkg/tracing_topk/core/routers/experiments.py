# tracing_topk/core/routers/experiments.py
from typing import Any, Dict

from fastapi import APIRouter, Body, HTTPException, Query
from fastapi.responses import StreamingResponse

from tracing_topk.core import config as settings
from tracing_topk.core.harness import run_experiment, summarize
from tracing_topk.core.models.experiment import ExperimentConfig
from tracing_topk.core.reports import jsonable, report_document, summary_workbook
from tracing_topk.core.routers.common import domain_errors

router = APIRouter()


def _run(payload: Dict[str, Any]):
    config = ExperimentConfig.from_mapping(payload)
    if config.trials > settings.MAX_API_TRIALS:
        raise HTTPException(
            status_code=400,
            detail=f"trials={config.trials} exceeds the service limit of {settings.MAX_API_TRIALS}",
        )
    results = run_experiment(config)
    return config, results, summarize(results, config)


@router.post("/experiments/run")
def run(
    payload: Dict[str, Any] = Body(..., description="Experiment config, same fields as the JSON config file"),
    include_results: bool = Query(False, description="Also return every trial"),
):
    with domain_errors():
        config, results, summary = _run(payload)
        doc = report_document(summary, results, config)
    if not include_results:
        doc.pop("results")
    return jsonable(doc)


@router.post("/experiments/export")
def export(payload: Dict[str, Any] = Body(...)):
    with domain_errors():
        config, results, summary = _run(payload)
    output = summary_workbook(summary, results)

    filename = f"{config.kind.value}_seed{config.master_seed}.xlsx"
    headers = {"Content-Disposition": f'attachment; filename="{filename}"'}
    return StreamingResponse(
        output,
        media_type="application/vnd.openxmlformats-officedocument.spreadsheetml.sheet",
        headers=headers,
    )
