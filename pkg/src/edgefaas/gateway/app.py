"""Unified REST gateway: every registry/function/storage/experiment
operation behind one HTTP surface.

All shared state funnels through the durable mapping store, so rebuilding
the app over the same store (a replica restart) restores every mapping.
Backend gateways and credentials never appear in responses.
"""

from __future__ import annotations

import base64
from typing import Any

import numpy as np
import yaml
from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse

from .. import errors as E
from ..backends.sim import FabricTopology, SimFabric
from ..control import ControlPlane
from ..harness import profile as profile_mod
from ..harness import workflows
from ..scheduler import FunctionCreation
from ..store import HttpMappingStore, LocalFileMappingStore, MappingStore, MemoryMappingStore
from .config import GatewayConfig

_STATUS = {
    E.UnknownResource: 404, E.UnknownApplication: 404, E.UnknownFunction: 404,
    E.UnknownBucket: 404, E.UnknownObject: 404, E.UnknownInvocation: 404,
    E.UnknownStage: 404,
    E.DuplicateEndpoint: 409, E.DuplicateApplication: 409, E.ResourceBusy: 409,
    E.BucketExists: 409, E.BucketNotEmpty: 409, E.NoCandidates: 409,
    E.NoTierCandidates: 409, E.NoAnchors: 409, E.MapMismatch: 409,
    E.NotASuccessor: 409,
    E.MalformedManifest: 422, E.InvalidField: 422, E.CycleDetected: 422,
    E.UnknownDependency: 422, E.BadEntrypoint: 422, E.InvalidBucketName: 422,
    E.MalformedUrl: 422, E.UnknownPolicy: 422,
    E.Unreachable: 502, E.BackendRejected: 502, E.PartialDeployFailure: 502,
    E.PartialDeleteFailure: 502, E.InvokeFailure: 502, E.MetricsUnavailable: 502,
    E.BackendWriteFailure: 502, E.PlacementFailed: 502, E.NoStorageCapacity: 502,
    E.NoLink: 502, E.BarrierTimeout: 502,
    E.CorruptStore: 503,
}


def _status_for(exc: E.EdgeFaasError) -> int:
    for klass, status in _STATUS.items():
        if isinstance(exc, klass):
            return status
    return 500


def _jsonable(value: Any) -> Any:
    if isinstance(value, bytes):
        return {"b64": base64.b64encode(value).decode("ascii")}
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def make_store(spec: str) -> MappingStore:
    if spec == "memory":
        return MemoryMappingStore()
    if spec.startswith("local:"):
        return LocalFileMappingStore(spec.split(":", 1)[1])
    if spec.startswith("http:"):
        return HttpMappingStore(spec.split(":", 1)[1])
    raise ValueError(f"unknown store spec {spec!r}")


def build_plane(config: GatewayConfig) -> tuple[ControlPlane, SimFabric | None]:
    """Construct the control plane (and fabric for the sim backend).

    Raises CorruptStore if the durable store fails to load.
    """
    store = make_store(config.store)
    knobs = dict(policy=config.policy, staleness_s=config.staleness_s,
                 result_ttl_s=config.result_ttl_s,
                 barrier_timeout_s=config.barrier_timeout_s,
                 large_data_threshold=config.large_data_threshold)
    if config.backend == "sim":
        topology = (FabricTopology.from_yaml(config.fabric)
                    if config.fabric else workflows.evaluation_fabric())
        fabric = SimFabric(topology)
        return ControlPlane.with_sim_fabric(fabric, store=store, **knobs), fabric
    from ..backends.http import HttpFaasProvider, HttpObjectStore
    from ..metrics import PrometheusMetricsProvider
    from ..scheduler import RttMatrix

    # the RTT matrix still comes from a topology file in http mode
    rtt = (FabricTopology.from_yaml(config.fabric).rtt_ms
           if config.fabric else RttMatrix())
    plane = ControlPlane(store=store, provider=None, object_store=None,
                         metrics=PrometheusMetricsProvider(), rtt=rtt, **knobs)
    # endpoint resolution needs the registry the plane just built
    plane.functions.provider = HttpFaasProvider(plane.registry)
    plane.storage.backend = HttpObjectStore(plane.registry)
    return plane, None


def create_app(config: GatewayConfig | None = None,
               plane: ControlPlane | None = None,
               fabric: SimFabric | None = None) -> FastAPI:
    config = config or GatewayConfig()
    app = FastAPI(title="edgefaas gateway", version="0.1.0")
    corrupt: str | None = None
    if plane is None:
        try:
            plane, fabric = build_plane(config)
        except E.CorruptStore as exc:
            corrupt = str(exc)
    app.state.plane = plane
    app.state.fabric = fabric
    app.state.config = config

    @app.exception_handler(E.EdgeFaasError)
    async def edgefaas_error(_request: Request, exc: E.EdgeFaasError):
        body: dict[str, Any] = {"detail": str(exc)}
        if isinstance(exc, (E.PartialDeployFailure, E.PartialDeleteFailure)):
            body["failed_resources"] = exc.failed
        if isinstance(exc, E.InvokeFailure):
            body["resource_id"] = exc.resource_id
        return JSONResponse(status_code=_status_for(exc), content=body)

    @app.middleware("http")
    async def refuse_when_corrupt(request: Request, call_next):
        if corrupt is not None and request.url.path != "/healthz":
            return JSONResponse(status_code=503,
                                content={"detail": f"store corrupt: {corrupt}"})
        return await call_next(request)

    @app.get("/healthz")
    async def healthz():
        return {"status": "degraded" if corrupt else "ok"}

    # -- resources ---------------------------------------------------------

    @app.post("/system/resources", status_code=201)
    async def register_resource(request: Request):
        manifest = yaml.safe_load(await request.body())
        return {"resource_id": plane.registry.register(manifest)}

    @app.get("/system/resources")
    async def list_resources():
        return plane.registry.list_resources()

    @app.delete("/system/resources/{resource_id}", status_code=204)
    async def unregister_resource(resource_id: int):
        plane.unregister_resource(resource_id)

    # -- applications --------------------------------------------------------

    @app.post("/system/applications", status_code=201)
    async def register_application(request: Request):
        dag = plane.apps.parse_application(yaml.safe_load(await request.body()))
        return dag.to_dict()

    @app.get("/system/applications")
    async def list_applications():
        return plane.apps.applications()

    @app.get("/system/applications/{application}")
    async def get_application(application: str):
        return plane.apps.get(application).to_dict()

    # -- functions ------------------------------------------------------------

    @app.post("/system/functions", status_code=201)
    async def deploy_function(body: dict):
        application, function = body["application"], body["function"]
        data_urls = body.get("data_urls") or []
        if data_urls or not plane.candidates.get(f"{application}.{function}"):
            plane.scheduler.schedule(
                FunctionCreation(application, function, data_urls=data_urls))
        deployed = plane.functions.deploy_function(
            application, function, body["package"])
        return {"resources": deployed}

    @app.get("/system/functions")
    async def get_functions(application: str, function: str | None = None):
        if function is None:
            return _jsonable(plane.functions.list_functions(application))
        return _jsonable(plane.functions.get_function(application, function))

    @app.delete("/system/functions", status_code=204)
    async def delete_function(application: str, function: str):
        plane.functions.delete_function(application, function)

    @app.post("/function/{qualified}")
    async def invoke_sync(qualified: str, request: Request,
                          invoke_one: bool = Query(default=False)):
        from ..functions import NamespacedFunction

        name = NamespacedFunction.parse(qualified)
        payload = yaml.safe_load(await request.body() or b"null")
        results = plane.functions.invoke(name.application, name.function,
                                         payload, sync=True, invoke_one=invoke_one)
        return {"results": {str(rid): _jsonable(r) for rid, r in results.items()}}

    @app.post("/async-function/{qualified}", status_code=202)
    async def invoke_async(qualified: str, request: Request,
                           invoke_one: bool = Query(default=False)):
        from ..functions import NamespacedFunction

        name = NamespacedFunction.parse(qualified)
        payload = yaml.safe_load(await request.body() or b"null")
        invocation_id = plane.functions.invoke(
            name.application, name.function, payload, sync=False,
            invoke_one=invoke_one)
        return {"invocation_id": invocation_id}

    @app.get("/system/invocations/{invocation_id}")
    async def invocation_result(invocation_id: str):
        results = plane.functions.get_result(invocation_id)
        return {"results": {str(rid): _jsonable(r) for rid, r in results.items()}}

    # -- storage ---------------------------------------------------------------

    @app.post("/system/storage/{application}/buckets", status_code=201)
    async def create_bucket(application: str, body: dict):
        plane.storage.create_bucket(application, body["bucket"],
                                    hints=body.get("hints"))
        return {"bucket": body["bucket"]}

    @app.get("/system/storage/{application}/buckets")
    async def list_buckets(application: str):
        return plane.storage.list_buckets(application)

    @app.delete("/system/storage/{application}/buckets/{bucket}", status_code=204)
    async def delete_bucket(application: str, bucket: str):
        plane.storage.delete_bucket(application, bucket)

    @app.post("/system/storage/{application}/buckets/{bucket}/objects")
    async def put_object(application: str, bucket: str, request: Request,
                         name: str = Query(...)):
        url = plane.storage.put_bytes(await request.body(), name, application, bucket)
        return {"url": url}

    @app.get("/system/storage/{application}/buckets/{bucket}/objects")
    async def list_objects(application: str, bucket: str):
        return plane.storage.list_objects(application, bucket)

    @app.get("/system/storage/{application}/objects")
    async def get_object(application: str, url: str = Query(...)):
        return Response(content=plane.storage.get_bytes(url),
                        media_type="application/octet-stream")

    @app.delete("/system/storage/{application}/buckets/{bucket}/objects/{name}",
                status_code=204)
    async def delete_object(application: str, bucket: str, name: str):
        plane.storage.delete_object(name, application, bucket)

    # -- experiments (self-contained runs over a fresh fabric) -------------------

    def _experiment_fabric() -> SimFabric:
        topology = (FabricTopology.from_yaml(config.fabric)
                    if config.fabric else workflows.evaluation_fabric())
        return SimFabric(topology)

    def _experiment_profile() -> profile_mod.LatencyProfile:
        if config.profile:
            return profile_mod.LatencyProfile.from_yaml(config.profile)
        return workflows.default_profile()

    @app.post("/system/experiments/video")
    async def experiment_video(body: dict | None = None):
        body = body or {}
        result = workflows.run_video_pipeline(
            _experiment_fabric(), _experiment_profile(),
            generator_resources=body.get("generator_resources"))
        return {
            "placements": result.placements,
            "partition": result.partition,
            "trace_total_s": result.total_s,
            "cost_model_total_s": result.cost_model_total_s,
            "trace": [{"at": ev.at, "label": ev.label, "resource_id": ev.resource_id}
                      for ev in result.trace],
        }

    @app.post("/system/experiments/fl")
    async def experiment_fl(body: dict | None = None):
        body = body or {}
        result = workflows.run_federated_learning(
            _experiment_fabric(),
            rounds=int(body.get("rounds", 1)),
            weight_dim=int(body.get("weight_dim", 8)),
            seed=int(body.get("seed", 0)))
        return {
            "placements": result.placements,
            "worker_routing": {str(k): v for k, v in result.worker_routing.items()},
            "weights": np.asarray(result.weights).tolist(),
            "total_s": result.total_s,
            "rounds": result.rounds,
        }

    @app.post("/system/experiments/sweep")
    async def experiment_sweep(body: dict | None = None):
        report = profile_mod.sweep_partitions(_experiment_profile())
        return {
            "best": report.best,
            "entries": [{"partition": e.partition, "compute_s": e.compute_s,
                         "transfer_s": e.transfer_s, "total_s": e.total_s}
                        for e in report.entries],
            "table": profile_mod.render_table(report),
        }

    return app
