"""Command line for running suites, replaying metrics, and calibrating.

The commands are thin clients of the HTTP service: each one builds a request
model and either calls the handler in process (the default) or POSTs it to a
running server given with ``--server``.  All numbers printed as JSON use the
same 17-significant-digit float format as the on-disk artifacts.
"""

from __future__ import annotations

import dataclasses
import sys
from pathlib import Path

import click
import httpx

from .config import default_config_text, load_config
from .persist import dumps
from .service.app import (
    handle_calibrate_offcp,
    handle_generate_scenarios,
    handle_replay_metrics,
    handle_run,
)
from .service.schemas import (
    MetricsModel,
    OffcpRequest,
    OffcpResponse,
    ReplayRequest,
    RunRequest,
    RunResponse,
    ScenariosRequest,
    ScenariosResponse,
)
from .suite import RunConfig

__all__ = ["main"]


def _post(server: str, path: str, payload: dict) -> dict:
    resp = httpx.post(server.rstrip("/") + path, json=payload, timeout=None)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        raise click.ClickException(f"server returned {resp.status_code}: {detail}")
    return resp.json()


def _stat_line(label: str, stat) -> str:
    if stat is None:
        return f"  {label:<4} -"
    return f"  {label:<4} {stat.mean:.4f} +- {stat.std:.4f}  (n={stat.count})"


@click.group()
def main() -> None:
    """Crowd-navigation benchmark with conformal collision bounds."""


@main.command("run")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Config file; omitted keys use defaults.")
@click.option("--method", type=click.Choice(["icp", "offcp", "acp_a", "acp_w", "orca"]),
              default=None, help="Navigation method to benchmark.")
@click.option("--humans", type=int, default=None, help="Crowd size.")
@click.option("--cases", type=int, default=None, help="Number of test cases.")
@click.option("--ni", type=int, default=None, help="Inner calibrate-replan iterations.")
@click.option("--cs", type=int, default=None, help="Calibration rollouts per iteration.")
@click.option("--es", type=click.Choice(["pse", "sse"], case_sensitive=False),
              default=None, help="Execution scheme.")
@click.option("--alpha", type=float, default=None, help="Miscoverage level.")
@click.option("--seed", type=int, default=None, help="Suite seed.")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Directory for replays and CSV tables.")
@click.option("--workers", type=int, default=None,
              help="Parallel worker processes (beats ICPNAV_WORKERS).")
@click.option("--server", default=None, help="POST to this service URL instead.")
def run_cmd(config_path, method, humans, cases, ni, cs, es, alpha, seed, out,
            workers, server) -> None:
    """Run a benchmark suite and print its summary."""
    overrides = {
        "method": method,
        "n_humans": humans,
        "cases": cases,
        "ni": ni,
        "cs": cs,
        "exec_scheme": es.upper() if es else None,
        "alpha": alpha,
        "seed": seed,
        "out_dir": out,
    }
    try:
        cfg = load_config(config_path) if config_path else RunConfig()
        cfg = dataclasses.replace(
            cfg, **{k: v for k, v in overrides.items() if v is not None}
        )
    except ValueError as exc:
        raise click.ClickException(str(exc))
    req = RunRequest.from_config(cfg, workers_override=workers)
    if server:
        resp = RunResponse.model_validate(_post(server, "/suites/run", req.model_dump()))
    else:
        resp = handle_run(req)

    s = resp.summary
    failures = [e for e in resp.episodes if e.error is not None]
    click.echo(
        f"method={cfg.method} cases={s.case_count} ES={cfg.exec_scheme} "
        f"NI={cfg.ni} CS={cfg.cs} seed={cfg.seed}"
    )
    click.echo(f"  SR   {s.success_rate:.4f}")
    for label, stat in (("NT", s.nt), ("PL", s.pl), ("ITR", s.itr), ("SD", s.sd), ("CR", s.cr)):
        click.echo(_stat_line(label, stat))
    if failures:
        click.echo(f"  {len(failures)} case(s) crashed; see episodes.csv", err=True)
    if resp.out:
        click.echo(f"artifacts written to {resp.out}")


@main.command("replay-metrics")
@click.argument("replay", type=click.Path(exists=True, dir_okay=False))
@click.option("--server", default=None, help="POST to this service URL instead.")
def replay_metrics_cmd(replay, server) -> None:
    """Recompute the metrics of one episode from its replay file."""
    if server:
        content = Path(replay).read_text(encoding="utf-8")
        req = ReplayRequest(content=content)
        resp = MetricsModel.model_validate(_post(server, "/metrics/replay", req.model_dump()))
    else:
        resp = handle_replay_metrics(ReplayRequest(path=replay))
    click.echo(dumps(resp.model_dump()))


@main.command("calibrate-offcp")
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Where to write the calibrated radii JSON.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Config file; omitted keys use defaults.")
@click.option("--humans", type=int, default=None, help="Crowd size.")
@click.option("--episodes", type=int, default=None, help="Calibration episodes.")
@click.option("--alpha", type=float, default=None, help="Miscoverage level.")
@click.option("--seed", type=int, default=None, help="Calibration seed.")
@click.option("--server", default=None, help="POST to this service URL instead.")
def calibrate_offcp_cmd(out, config_path, humans, episodes, alpha, seed, server) -> None:
    """Calibrate radii offline from robot-free rollouts."""
    overrides = {
        "n_humans": humans,
        "offcp_episodes": episodes,
        "alpha": alpha,
        "seed": seed,
    }
    try:
        cfg = load_config(config_path) if config_path else RunConfig()
        cfg = dataclasses.replace(
            cfg, **{k: v for k, v in overrides.items() if v is not None}
        )
    except ValueError as exc:
        raise click.ClickException(str(exc))
    if server:
        # The server may not share a filesystem; fetch the radii and write
        # them locally.
        req = OffcpRequest(config=RunRequest.from_config(cfg), out=None)
        resp = OffcpResponse.model_validate(
            _post(server, "/calibration/offcp", req.model_dump())
        )
        from .baselines import OffcpRadii
        from .conformal import ConformalRadii
        from .persist import save_radii
        import numpy as np

        save_radii(
            out,
            OffcpRadii(
                radii=ConformalRadii(
                    radii=np.asarray(resp.radii),
                    alpha=resp.alpha,
                    sample_count=resp.sample_count,
                    quantile_rule=resp.quantile_rule,
                ),
                episodes=resp.episodes,
                n_samples=resp.sample_count,
            ),
        )
    else:
        req = OffcpRequest(config=RunRequest.from_config(cfg), out=out)
        resp = handle_calibrate_offcp(req)
    click.echo(dumps({"radii": resp.radii, "alpha": resp.alpha, "samples": resp.sample_count}))
    click.echo(f"radii written to {out}")


@main.command("gen-scenarios")
@click.option("--humans", type=int, default=10, help="Crowd size.")
@click.option("--count", type=int, default=1, help="How many scenarios.")
@click.option("--seed", type=int, default=0, help="Generator seed.")
@click.option("--geometry", type=click.Choice(["circle", "square"]), default="circle")
@click.option("--server", default=None, help="POST to this service URL instead.")
def gen_scenarios_cmd(humans, count, seed, geometry, server) -> None:
    """Print generated scenario layouts as JSON."""
    req = ScenariosRequest(humans=humans, count=count, seed=seed, geometry=geometry)
    if server:
        resp = ScenariosResponse.model_validate(
            _post(server, "/scenarios/generate", req.model_dump())
        )
    else:
        resp = handle_generate_scenarios(req)
    click.echo(dumps(resp.model_dump()))


@main.command("init-config")
@click.argument("path", type=click.Path(dir_okay=False))
def init_config_cmd(path) -> None:
    """Write a config file populated with the default parameters."""
    if Path(path).exists():
        raise click.ClickException(f"{path} already exists")
    Path(path).write_text(default_config_text(), encoding="utf-8")
    click.echo(f"wrote {path}")


@main.command("serve")
@click.option("--host", default="127.0.0.1", help="Bind address.")
@click.option("--port", type=int, default=8000, help="Bind port.")
def serve_cmd(host, port) -> None:
    """Start the HTTP service."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main(sys.argv[1:])
