"""HTTP facade over the benchmark laboratory.

Every endpoint is a stateless wrapper: parse the payload into core
objects, call the core function, shape the result back into JSON.  All
domain failures surface as 400s with the original message; request
shape problems are FastAPI's usual 422s.
"""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..bench import (
    emit_csv,
    emit_plot,
    experiment_spec_from_dict,
    parse_csv,
    run_experiment,
    stabilization_fraction,
)
from ..errors import LqrLabError, NoStabilizingSolutionError
from ..lds import GaussianLinear, EpisodicOracle, instance_from_dict
from ..policysearch import gradient_variance_diag
from ..riccati import dare_solve, stability_report
from ..sysid import least_squares_identify
from .schemas import (
    BenchRequest,
    BenchResponse,
    DiagVarianceRequest,
    DiagVarianceResponse,
    HealthResponse,
    IdentifyRequest,
    IdentifyResponse,
    PlotRequest,
    PlotResponse,
    SolveRequest,
    SolveResponse,
    SummaryRow,
    _finite_or_none,
)


def create_app():
    app = FastAPI(title="lqrlab", version=__version__)

    @app.exception_handler(LqrLabError)
    async def domain_error(request: Request, exc: LqrLabError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/solve", response_model=SolveResponse)
    def solve(req: SolveRequest):
        instance = instance_from_dict(req.instance.to_document())
        sol = dare_solve(instance.system.A, instance.system.B, instance.cost)
        rho = stability_report(
            instance.system.A - instance.system.B @ sol.K).spectral_radius
        noise_cost = 0.5 * float(
            np.trace(sol.M @ instance.system.noise_cov))
        return SolveResponse(M=sol.M.tolist(), K=sol.K.tolist(),
                             spectral_radius=rho, noise_cost=noise_cost,
                             residual=sol.residual,
                             iterations=sol.iterations)

    @app.post("/identify", response_model=IdentifyResponse)
    def identify(req: IdentifyRequest):
        instance = instance_from_dict(req.instance.to_document())
        rng = np.random.default_rng(req.seed)
        oracle = EpisodicOracle(instance)
        probe = GaussianLinear(
            K=np.zeros((instance.system.p, instance.system.d)),
            exploration_std=req.excitation_std)
        trajectories = [oracle.query(probe, instance.episode_len, rng)
                        for _ in range(req.episodes)]
        estimate = least_squares_identify(trajectories, ridge=req.ridge)
        gain, synthesis_error = None, None
        try:
            gain = dare_solve(estimate.A_hat, estimate.B_hat,
                              instance.cost).K.tolist()
        except NoStabilizingSolutionError as exc:
            synthesis_error = str(exc)
        return IdentifyResponse(A_hat=estimate.A_hat.tolist(),
                                B_hat=estimate.B_hat.tolist(),
                                residual_cov=estimate.residual_cov.tolist(),
                                n_transitions=estimate.n_transitions,
                                gain=gain, synthesis_error=synthesis_error,
                                samples_used=oracle.samples_used)

    @app.post("/bench", response_model=BenchResponse)
    def bench(req: BenchRequest):
        spec = experiment_spec_from_dict(req.spec)
        table = run_experiment(spec, seed_base=req.seed_base)
        fractions = stabilization_fraction(table)
        rows = [
            SummaryRow(method=method, samples=samples,
                       median=_finite_or_none(s.median),
                       min=_finite_or_none(s.min),
                       max=_finite_or_none(s.max), n_seeds=s.n_seeds,
                       stabilization_fraction=fractions[(method, samples)])
            for (method, samples), s in sorted(table.summaries().items())
        ]
        return BenchResponse(csv=emit_csv(table), summaries=rows)

    @app.post("/plot", response_model=PlotResponse)
    def plot(req: PlotRequest):
        table = parse_csv(req.csv)
        return PlotResponse(svg=emit_plot(table, metric=req.metric))

    @app.post("/diag/variance", response_model=DiagVarianceResponse)
    def diag_variance(req: DiagVarianceRequest):
        diag = gradient_variance_diag(req.dims, req.sigma, req.n_samples,
                                      np.random.default_rng(req.seed))
        slope = diag.slope if math.isfinite(diag.slope) else None
        return DiagVarianceResponse(dims=diag.dims,
                                    mean_norms=diag.mean_norms,
                                    expected_norms=diag.expected_norms,
                                    slope=slope)

    return app
