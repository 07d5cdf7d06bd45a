"""HTTP service exposing the lattice toolkit.

One POST endpoint per operation, request/response bodies validated by
pydantic models.  The CLI is a thin client of this app (in-process by
default), so every capability lives behind the same schema whether the
caller is local or remote.  Artifacts (model documents, fields, CSV
tables) travel as text in the response; writing files is the client's
business.

Error discipline: invalid parameters and capacity limits map to 422,
numerical failures (nonconvergence, oracle mismatch, over-constrained
ensembles) map to 500.
"""

from __future__ import annotations

import functools
import io
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import ensemble as ens
from . import onsager, sampler, scan, tfim
from .operator import (CapacityError, ConvergenceError, ReducibleOperatorError,
                       TransferOperator, dominant_eigenpair)
from .patterns import ModelParams

__all__ = ["app", "default_threads", "serve"]

app = FastAPI(title="merwfield", version="0.1.0")

_PARAM_ERRORS = (ValueError, CapacityError, KeyError, IndexError)
_NUMERIC_ERRORS = (ConvergenceError, ReducibleOperatorError,
                   onsager.OracleMismatch, ens.EmptyEnsembleError)


def _guard(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _NUMERIC_ERRORS as e:
            raise HTTPException(status_code=500, detail=str(e))
        except _PARAM_ERRORS as e:
            raise HTTPException(status_code=422, detail=str(e))
    return wrapper


def default_threads() -> int:
    """Worker cap for parallel sections; MERW_THREADS overrides."""
    env = os.environ.get("MERW_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"MERW_THREADS must be an integer, got {env!r}")
        if n < 1:
            raise ValueError("MERW_THREADS must be >= 1")
        return n
    return min(8, os.cpu_count() or 1)


class LatticeRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    width: int = Field(10, ge=1, le=26)
    cyclic: bool = True
    beta: float = Field(1.0, gt=0)
    mu: float = 0.0
    jh: float = 1.0
    jv: float = 1.0
    representation: str = "auto"
    tol: float = Field(1e-13, gt=0, le=1e-6)


class ModelRequest(LatticeRequest):
    before: int = Field(3, ge=1)
    after: int = Field(3, ge=1)
    compare_exact: bool = True


class ExactValues(BaseModel):
    U: float
    H: float
    quadrature_error: float
    near_critical: bool


class ModelResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    U: float
    H: float
    mag: float
    lam: float
    residual: float
    iterations: int
    unreachable_contexts: int
    model_json: str
    model_hash: str
    exact: ExactValues | None = None
    err_U: float | None = None
    err_H: float | None = None


def _solve(req: LatticeRequest):
    params = ModelParams(width=req.width, cyclic=req.cyclic, beta=req.beta,
                         mu=req.mu, jh=req.jh, jv=req.jv)
    op = TransferOperator(params, representation=req.representation)
    return op, dominant_eigenpair(op, tol=req.tol)


def _isotropic(req: LatticeRequest) -> bool:
    return req.mu == 0.0 and req.jh == req.jv


@app.get("/healthz")
def healthz():
    return {"status": "ok"}


@app.post("/model", response_model=ModelResponse)
@_guard
def post_model(req: ModelRequest) -> ModelResponse:
    op, sol = _solve(req)
    model = scan.derive_model(sol, op, scan.ContextShape(req.before, req.after))
    obs = scan.observables(model)
    text = scan.model_to_json(model)
    out = ModelResponse(
        U=obs["U"], H=obs["H"], mag=obs["mag"], lam=sol.lam,
        residual=sol.residual, iterations=sol.iterations,
        unreachable_contexts=int(model.unreachable.sum()),
        model_json=text, model_hash=scan.model_hash(text))
    if req.compare_exact and _isotropic(req):
        ex = onsager.exact_uh(req.jh, req.beta)
        out.exact = ExactValues(U=ex.U, H=ex.H,
                                quadrature_error=ex.quadrature_error,
                                near_critical=ex.near_critical)
        out.err_U = obs["U"] - ex.U
        out.err_H = obs["H"] - ex.H
    return out


class SweepRequest(BaseModel):
    j_min: float
    j_max: float
    steps: int = Field(ge=2)
    widths: list[int] = Field(default=[10], min_length=1)
    before: int = Field(3, ge=1)
    after: int = Field(3, ge=1)
    cyclic: bool = True
    beta: float = Field(1.0, gt=0)
    representation: str = "auto"
    tol: float = Field(1e-13, gt=0, le=1e-6)


class SweepRow(BaseModel):
    # numeric fields are None on a failed cell (JSON has no NaN)
    J: float
    U_merw: float | None
    H_merw: float | None
    U_exact: float | None
    H_exact: float | None
    err_U: float | None
    err_H: float | None
    width: int
    error: str | None = None


class SweepResponse(BaseModel):
    rows: list[SweepRow]
    csv: str


SWEEP_COLUMNS = ("J", "U_merw", "H_merw", "U_exact", "H_exact",
                 "err_U", "err_H", "width")


def _sweep_cell(row: SweepRow, col: str) -> str:
    v = getattr(row, col)
    if col == "width":
        return str(v)
    return "nan" if v is None else "%.17g" % v


def _sweep_row(j: float, width: int, req: SweepRequest) -> SweepRow:
    try:
        sub = ModelRequest(width=width, cyclic=req.cyclic, beta=req.beta,
                           mu=0.0, jh=j, jv=j, representation=req.representation,
                           tol=req.tol, before=req.before, after=req.after,
                           compare_exact=False)
        op, sol = _solve(sub)
        model = scan.derive_model(sol, op, scan.ContextShape(req.before, req.after))
        obs = scan.observables(model)
        ex = onsager.exact_uh(j, req.beta)
        return SweepRow(J=j, U_merw=obs["U"], H_merw=obs["H"], U_exact=ex.U,
                        H_exact=ex.H, err_U=obs["U"] - ex.U,
                        err_H=obs["H"] - ex.H, width=width)
    except (*_PARAM_ERRORS, *_NUMERIC_ERRORS) as e:
        return SweepRow(J=j, U_merw=None, H_merw=None, U_exact=None,
                        H_exact=None, err_U=None, err_H=None, width=width,
                        error=str(e))


@app.post("/sweep", response_model=SweepResponse)
@_guard
def post_sweep(req: SweepRequest) -> SweepResponse:
    if not req.j_min < req.j_max:
        raise ValueError("sweep needs j_min < j_max")
    js = np.linspace(req.j_min, req.j_max, req.steps)
    grid = [(float(j), w) for j in js for w in req.widths]
    with ThreadPoolExecutor(max_workers=default_threads()) as pool:
        rows = list(pool.map(lambda cell: _sweep_row(cell[0], cell[1], req), grid))
    rows.sort(key=lambda r: (r.J, r.width))
    lines = [",".join(SWEEP_COLUMNS)]
    lines += [",".join(_sweep_cell(r, c) for c in SWEEP_COLUMNS) for r in rows]
    return SweepResponse(rows=rows, csv="\n".join(lines) + "\n")


class SampleRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model_json: str
    rows: int = Field(ge=1, le=4096)
    cols: int = Field(ge=1, le=4096)
    seed: int = 0


class SampleResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    pbm: str
    model_hash: str
    rows: int
    cols: int
    seed: int
    mean_spin: float


@app.post("/sample", response_model=SampleResponse)
@_guard
def post_sample(req: SampleRequest) -> SampleResponse:
    model = scan.model_from_json(req.model_json)
    field = sampler.sample_field(model, req.rows, req.cols, req.seed)
    buf = io.StringIO()
    sampler.write_pbm(field, buf)
    return SampleResponse(pbm=buf.getvalue(),
                          model_hash=scan.model_hash(req.model_json),
                          rows=req.rows, cols=req.cols, seed=req.seed,
                          mean_spin=float(field.mean()))


class AnalyticRequest(BaseModel):
    J: float
    beta: float = Field(1.0, gt=0)


class AnalyticResponse(BaseModel):
    J: float
    beta: float
    U: float
    H: float
    quadrature_error: float
    near_critical: bool
    critical_coupling: float


@app.post("/analytic", response_model=AnalyticResponse)
@_guard
def post_analytic(req: AnalyticRequest) -> AnalyticResponse:
    ex = onsager.exact_uh(req.J, req.beta)
    return AnalyticResponse(J=req.J, beta=req.beta, U=ex.U, H=ex.H,
                            quadrature_error=ex.quadrature_error,
                            near_critical=ex.near_critical,
                            critical_coupling=onsager.critical_coupling(req.beta))


class MCRequest(BaseModel):
    rows: int = Field(64, ge=2, le=1024)
    cols: int = Field(64, ge=2, le=1024)
    sweeps: int = Field(20000, ge=1)
    seed: int = 0
    burn_in: int | None = None
    beta: float = Field(1.0, gt=0)
    mu: float = 0.0
    jh: float = 0.2
    jv: float = 0.2


class MCResponse(BaseModel):
    u_mean: float
    mag_mean: float
    stderr_u: float
    stderr_mag: float
    burn_in: int
    block_prob: list[float]
    csv: str


@app.post("/mc", response_model=MCResponse)
@_guard
def post_mc(req: MCRequest) -> MCResponse:
    from . import mc  # deferred: numba import is slow

    params = ModelParams(width=2, cyclic=False, beta=req.beta, mu=req.mu,
                         jh=req.jh, jv=req.jv)
    res = mc.run_metropolis(params, req.rows, req.cols, req.sweeps,
                            seed=req.seed, burn_in=req.burn_in)
    buf = io.StringIO()
    mc.write_series_csv(res, buf)
    return MCResponse(u_mean=res.u_mean, mag_mean=res.mag_mean,
                      stderr_u=res.stderr_u, stderr_mag=res.stderr_mag,
                      burn_in=res.burn_in,
                      block_prob=[float(x) for x in res.block_prob],
                      csv=buf.getvalue())


class TfimRequest(BaseModel):
    J: float = 0.0
    h: float = 0.0
    lat: int = Field(100, ge=4, le=tfim.LAT_LIMIT)


class TfimResponse(BaseModel):
    J: float
    h: float
    lat: int
    lam: float
    csv: str


@app.post("/tfim", response_model=TfimResponse)
@_guard
def post_tfim(req: TfimRequest) -> TfimResponse:
    dist = tfim.tfim_joint(req.J, req.h, req.lat)
    buf = io.StringIO()
    tfim.write_joint_csv(dist, buf)
    return TfimResponse(J=dist.J, h=dist.h, lat=dist.lat, lam=dist.lam,
                        csv=buf.getvalue())


class PathRequest(BaseModel):
    circuit: str
    layer: int = -1


class PathResponse(BaseModel):
    layer: int
    num_layers: int
    distribution: list[float]
    log_weight: float


@app.post("/path", response_model=PathResponse)
@_guard
def post_path(req: PathRequest) -> PathResponse:
    e = ens.circuit_from_json(req.circuit)
    dist = e.marginal(req.layer)
    return PathResponse(layer=req.layer % len(e), num_layers=len(e),
                        distribution=[float(x) for x in dist],
                        log_weight=e.log_weight())


class MerminResponse(BaseModel):
    AB: float
    AC: float
    BC: float
    sum: float
    violated: bool


@app.post("/mermin", response_model=MerminResponse)
@_guard
def post_mermin() -> MerminResponse:
    return MerminResponse(**ens.mermin_summary())


class Sat3Request(BaseModel):
    dimacs: str


class Sat3Response(BaseModel):
    num_vars: int
    num_clauses: int
    count: int
    posterior: list[float]
    top_index: int
    top_prob: float
    assignment: list[int] | None


@app.post("/sat3", response_model=Sat3Response)
@_guard
def post_sat3(req: Sat3Request) -> Sat3Response:
    num_vars, clauses = ens.parse_dimacs(req.dimacs)
    posterior, count = ens.sat3_posterior(num_vars, clauses)
    top = int(posterior.argmax())
    assignment = None
    if count == 1:
        assignment = [(top >> (num_vars - 1 - i)) & 1 for i in range(num_vars)]
    return Sat3Response(num_vars=num_vars, num_clauses=len(clauses),
                        count=count, posterior=[float(x) for x in posterior],
                        top_index=top, top_prob=float(posterior[top]),
                        assignment=assignment)


def serve(host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(app, host=host, port=port)
