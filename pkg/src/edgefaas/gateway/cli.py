"""Operator CLI mirroring the gateway routes.

Exit codes: 0 ok, 1 usage error, 2 validation/conflict rejected by the
gateway, 3 backend or gateway failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import DEFAULT_CONFIG_ENV, GatewayConfig

DEFAULT_GATEWAY = "http://127.0.0.1:8080"


class ApiError(Exception):
    def __init__(self, exit_code: int, message: str):
        super().__init__(message)
        self.exit_code = exit_code


class HttpClient:
    def __init__(self, base_url: str) -> None:
        import requests

        self.base_url = base_url.rstrip("/")
        self.session = requests.Session()

    def request(self, method: str, path: str, **kwargs):
        import requests

        if "content" in kwargs:  # align with the httpx-style test client
            kwargs["data"] = kwargs.pop("content")
        try:
            return self.session.request(method, self.base_url + path, **kwargs)
        except requests.RequestException as exc:
            raise ApiError(3, f"gateway unreachable: {exc}") from exc


def get_client(gateway: str):
    """Swapped out by tests to route requests in-process."""
    return HttpClient(gateway)


def _check(resp):
    if resp.status_code >= 500:
        raise ApiError(3, _detail(resp))
    if resp.status_code >= 400:
        raise ApiError(2, _detail(resp))
    return resp


def _detail(resp) -> str:
    try:
        return resp.json().get("detail", resp.text)
    except ValueError:
        return resp.text


def _echo_json(data) -> None:
    click.echo(json.dumps(data, indent=2, sort_keys=True))


@click.group()
@click.option("--gateway", envvar="EDGEFAAS_GATEWAY", default=DEFAULT_GATEWAY,
              show_default=True, help="Gateway base URL.")
@click.pass_context
def cli(ctx: click.Context, gateway: str) -> None:
    """Control a running edgefaas gateway."""
    if ctx.obj is None:
        ctx.obj = get_client(gateway)


# -- resources ------------------------------------------------------------------

@cli.group()
def resource() -> None:
    """Register, unregister, and list resources."""


@resource.command("register")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def resource_register(client, manifest: str) -> None:
    resp = _check(client.request("POST", "/system/resources",
                                 content=Path(manifest).read_bytes()))
    _echo_json(resp.json())


@resource.command("unregister")
@click.argument("resource_id", type=int)
@click.pass_obj
def resource_unregister(client, resource_id: int) -> None:
    _check(client.request("DELETE", f"/system/resources/{resource_id}"))
    click.echo(f"unregistered {resource_id}")


@resource.command("list")
@click.pass_obj
def resource_list(client) -> None:
    _echo_json(_check(client.request("GET", "/system/resources")).json())


# -- applications ------------------------------------------------------------------

@cli.group()
def app() -> None:
    """Register and inspect applications."""


@app.command("register")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def app_register(client, manifest: str) -> None:
    resp = _check(client.request("POST", "/system/applications",
                                 content=Path(manifest).read_bytes()))
    _echo_json(resp.json())


@app.command("list")
@click.pass_obj
def app_list(client) -> None:
    _echo_json(_check(client.request("GET", "/system/applications")).json())


# -- functions ---------------------------------------------------------------------

@cli.group()
def fn() -> None:
    """Deploy, invoke, and manage functions."""


@fn.command("deploy")
@click.argument("application")
@click.argument("function")
@click.argument("package")
@click.option("--data-url", "data_urls", multiple=True,
              help="Input object url anchoring data-affinity scheduling.")
@click.pass_obj
def fn_deploy(client, application: str, function: str, package: str,
              data_urls: tuple[str, ...]) -> None:
    body = {"application": application, "function": function, "package": package,
            "data_urls": list(data_urls)}
    _echo_json(_check(client.request("POST", "/system/functions", json=body)).json())


@fn.command("invoke")
@click.argument("application")
@click.argument("function")
@click.option("--payload", "-d", default="null", help="JSON payload.")
@click.option("--sync/--async", "sync", default=True)
@click.option("--invoke-one", is_flag=True, default=False)
@click.pass_obj
def fn_invoke(client, application: str, function: str, payload: str,
              sync: bool, invoke_one: bool) -> None:
    route = "function" if sync else "async-function"
    resp = _check(client.request(
        "POST", f"/{route}/{application}.{function}",
        params={"invoke_one": invoke_one}, content=payload.encode()))
    _echo_json(resp.json())


@fn.command("result")
@click.argument("invocation_id")
@click.pass_obj
def fn_result(client, invocation_id: str) -> None:
    _echo_json(_check(client.request(
        "GET", f"/system/invocations/{invocation_id}")).json())


@fn.command("delete")
@click.argument("application")
@click.argument("function")
@click.pass_obj
def fn_delete(client, application: str, function: str) -> None:
    _check(client.request("DELETE", "/system/functions",
                          params={"application": application, "function": function}))
    click.echo(f"deleted {application}.{function}")


@fn.command("get")
@click.argument("application")
@click.argument("function")
@click.pass_obj
def fn_get(client, application: str, function: str) -> None:
    _echo_json(_check(client.request(
        "GET", "/system/functions",
        params={"application": application, "function": function})).json())


@fn.command("list")
@click.argument("application")
@click.pass_obj
def fn_list(client, application: str) -> None:
    _echo_json(_check(client.request(
        "GET", "/system/functions", params={"application": application})).json())


# -- storage -----------------------------------------------------------------------

@cli.group()
def store() -> None:
    """Bucket and object operations."""


@store.command("mb")
@click.argument("application")
@click.argument("bucket")
@click.option("--generator-resource", type=int, default=None)
@click.pass_obj
def store_mb(client, application: str, bucket: str, generator_resource) -> None:
    hints = ({"generator_resource": generator_resource}
             if generator_resource is not None else None)
    _check(client.request("POST", f"/system/storage/{application}/buckets",
                          json={"bucket": bucket, "hints": hints}))
    click.echo(f"created {application}/{bucket}")


@store.command("rb")
@click.argument("application")
@click.argument("bucket")
@click.pass_obj
def store_rb(client, application: str, bucket: str) -> None:
    _check(client.request(
        "DELETE", f"/system/storage/{application}/buckets/{bucket}"))
    click.echo(f"removed {application}/{bucket}")


@store.command("put")
@click.argument("file_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("application")
@click.argument("bucket")
@click.pass_obj
def store_put(client, file_path: str, application: str, bucket: str) -> None:
    path = Path(file_path)
    resp = _check(client.request(
        "POST", f"/system/storage/{application}/buckets/{bucket}/objects",
        params={"name": path.name}, content=path.read_bytes()))
    _echo_json(resp.json())


@store.command("get")
@click.argument("url")
@click.argument("file_path", type=click.Path(dir_okay=False))
@click.pass_obj
def store_get(client, url: str, file_path: str) -> None:
    application = url.split("/", 1)[0]
    resp = _check(client.request("GET", f"/system/storage/{application}/objects",
                                 params={"url": url}))
    Path(file_path).write_bytes(resp.content)
    click.echo(f"wrote {file_path}")


@store.command("rm")
@click.argument("application")
@click.argument("bucket")
@click.argument("object_name")
@click.pass_obj
def store_rm(client, application: str, bucket: str, object_name: str) -> None:
    _check(client.request(
        "DELETE",
        f"/system/storage/{application}/buckets/{bucket}/objects/{object_name}"))
    click.echo(f"removed {application}/{bucket}/{object_name}")


@store.command("ls")
@click.argument("application")
@click.argument("bucket", required=False)
@click.pass_obj
def store_ls(client, application: str, bucket: str | None) -> None:
    if bucket is None:
        resp = _check(client.request(
            "GET", f"/system/storage/{application}/buckets"))
    else:
        resp = _check(client.request(
            "GET", f"/system/storage/{application}/buckets/{bucket}/objects"))
    _echo_json(resp.json())


# -- experiments ----------------------------------------------------------------------

@cli.group()
def exp() -> None:
    """Run the packaged workflow experiments."""


@exp.command("video")
@click.pass_obj
def exp_video(client) -> None:
    doc = _check(client.request("POST", "/system/experiments/video", json={})).json()
    doc.pop("trace", None)
    _echo_json(doc)


@exp.command("fl")
@click.option("--rounds", type=int, default=1, show_default=True)
@click.option("--weight-dim", type=int, default=8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_obj
def exp_fl(client, rounds: int, weight_dim: int, seed: int) -> None:
    body = {"rounds": rounds, "weight_dim": weight_dim, "seed": seed}
    _echo_json(_check(client.request(
        "POST", "/system/experiments/fl", json=body)).json())


@exp.command("sweep")
@click.option("--format", "fmt", type=click.Choice(["csv", "table", "svg"]),
              default="table", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the report to a file instead of stdout.")
@click.pass_obj
def exp_sweep(client, fmt: str, out: str | None) -> None:
    doc = _check(client.request("POST", "/system/experiments/sweep", json={})).json()
    if fmt == "table" and out is None:
        click.echo(doc["table"], nl=False)
        return
    from ..harness.profile import PartitionCost, PartitionReport, emit_report

    report = PartitionReport(
        entries=tuple(PartitionCost(e["partition"], e["compute_s"],
                                    e["transfer_s"], e["total_s"])
                      for e in doc["entries"]),
        best=doc["best"])
    path = emit_report(report, fmt=fmt, path=out or f"partition_report.{fmt}")
    click.echo(f"wrote {path}")


# -- server ----------------------------------------------------------------------------

@cli.command("serve")
@click.option("--config", "config_path", envvar=DEFAULT_CONFIG_ENV, default=None,
              type=click.Path(exists=True, dir_okay=False))
def serve(config_path: str | None) -> None:
    """Run the gateway (blocking)."""
    import uvicorn

    from .app import create_app

    config = GatewayConfig.from_yaml(config_path) if config_path else GatewayConfig()
    uvicorn.run(create_app(config), host=config.host, port=config.port)


def main(argv: list[str] | None = None, client=None) -> int:
    try:
        cli.main(args=argv, obj=client, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except ApiError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
