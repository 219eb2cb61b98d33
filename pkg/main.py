"""
boundlda - HTTP API
Fit, evaluate and benchmark Bhattacharyya-bound discriminant projections
"""

from typing import Dict, Optional, Union

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from bench_errors import NumericalError
from bench_runner import (
    RunConfig,
    SYNTH_KINDS,
    cmd_bench,
    cmd_eval,
    cmd_fit,
    cmd_synth,
    format_cell,
    synthesize,
)
from bench_settings import VERSION, get_api_bind
from dataset_loader import load_csv, normalize_minmax
from knn_eval import fit_projection
from l1blda_admm import AdmmConfig
from run_logger import log_event, setup_logging
from spectral_solvers import METHODS

setup_logging()

app = FastAPI(
    title="boundlda API",
    description="""
    **Bhattacharyya-bound discriminant analysis over HTTP**

    * `/synth` - synthetic four-class demo data
    * `/fit` - L2BLDA, L1BLDA, LDA or PCA projection of a CSV dataset
    * `/evaluate` - 1-NN accuracy of a saved projection
    * `/bench` - full benchmark run with CSV reports
    """,
    version=VERSION,
)


class SynthRequest(BaseModel):
    kind: str = 'fig1'
    seed: int = Field(default=0, ge=0)
    with_outliers: bool = False
    out_path: Optional[str] = None


class FitRequest(BaseModel):
    dataset_path: str
    label_column: Union[int, str] = -1
    method: str
    d: int = Field(ge=1)
    normalize: bool = True
    seed: Optional[int] = Field(default=None, ge=0)
    admm: Optional[AdmmConfig] = None
    out_path: Optional[str] = None


class EvaluateRequest(BaseModel):
    train_path: str
    test_path: str
    projection_path: str
    label_column: Union[int, str] = -1
    normalize: bool = True


def _http_error(action: str, e: Exception) -> HTTPException:
    """400 for usage, data and file errors, 500 for numerical failures and anything unexpected"""
    log_event(f"❌ {action} failed: {e}")
    if isinstance(e, NumericalError) or not isinstance(e, (ValueError, OSError)):
        return HTTPException(status_code=500, detail=str(e))
    return HTTPException(status_code=400, detail=str(e))


def _load(path: str, label_column: Union[int, str], normalize: bool):
    data = load_csv(path, label_column=label_column)
    return normalize_minmax(data) if normalize else data


@app.get("/", tags=["General"], summary="API Information")
def root():
    """Get API information, version, and available endpoints"""
    return {
        "name": "boundlda API",
        "version": VERSION,
        "methods": list(METHODS),
        "synthetic": list(SYNTH_KINDS),
        "endpoints": [
            "/synth",
            "/fit",
            "/evaluate",
            "/bench",
        ]
    }


@app.post("/synth", tags=["Data"], summary="Synthetic Dataset")
def api_synth(req: SynthRequest):
    """Generate a synthetic dataset, optionally writing it as CSV"""
    try:
        if req.out_path:
            data = cmd_synth(req.kind, req.seed, req.with_outliers, req.out_path)
        else:
            data = synthesize(req.kind, req.seed, req.with_outliers)
        return {
            "name": data.name,
            "N": data.N,
            "n": data.n,
            "c": data.c,
            "class_counts": data.class_counts.tolist(),
            "path": req.out_path,
        }
    except Exception as e:
        raise _http_error("Synthetic data", e)


@app.post("/fit", tags=["Projections"], summary="Fit Projection")
def api_fit(req: FitRequest):
    """Fit a projection on a CSV dataset and return the matrix"""
    log_event(f"🚀 Fit request: {req.method} d={req.d} on {req.dataset_path}")
    try:
        data = _load(req.dataset_path, req.label_column, req.normalize)
        admm = req.admm
        if req.seed is not None:
            # top-level seed wins over admm.seed
            admm = (admm or AdmmConfig()).model_copy(update={'seed': req.seed})
        if req.out_path:
            projection = cmd_fit(data, req.method, req.d, req.out_path, admm=admm)
        else:
            projection = fit_projection(data, req.method, req.d, admm)
        return {
            "method": projection.method,
            "n": projection.n,
            "d": projection.d,
            "objective": projection.objective,
            "w": projection.w.tolist(),
            "path": req.out_path,
        }
    except Exception as e:
        raise _http_error("Fit", e)


@app.post("/evaluate", tags=["Projections"], summary="1-NN Accuracy")
def api_evaluate(req: EvaluateRequest):
    """1-NN accuracy of a saved projection on a train/test pair"""
    try:
        train = _load(req.train_path, req.label_column, req.normalize)
        test = _load(req.test_path, req.label_column, req.normalize)
        return {"accuracy": cmd_eval(req.projection_path, train, test)}
    except Exception as e:
        raise _http_error("Evaluate", e)


@app.post("/bench", tags=["Bench"], summary="Run Benchmark")
def api_bench(config: RunConfig):
    """Run a benchmark and return report paths, failures and the Acc (Dim) tables"""
    try:
        report = cmd_bench(config)
    except Exception as e:
        raise _http_error("Bench", e)

    tables: Dict[str, Dict[str, Dict[str, str]]] = {}
    for noise, table in report.summaries.items():
        tables[noise] = {
            dataset: {method: format_cell(*cell) for method, cell in cells.items()}
            for dataset, cells in table.items()
        }
    return {
        "output_dir": report.output_dir,
        "files": report.files,
        "runs": len(report.results),
        "failures": report.failures,
        "summaries": tables,
    }


if __name__ == "__main__":
    import uvicorn
    host, port = get_api_bind()
    uvicorn.run(app, host=host, port=port)
