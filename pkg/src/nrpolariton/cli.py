"""Command-line client.

Each subcommand posts one scenario run to the HTTP API (a remote server via
--server, or the in-process service by default) and writes the returned CSV
files under --out. Exit codes: 0 success, 2 config error, 3 scenario error,
4 I/O error, 5 server error; failures print one machine-parsable line
``error:<category>: <message>`` on stderr.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import httpx

from . import scenarios


class CliFailure(Exception):
    def __init__(self, category: str, message: str, exit_code: int):
        super().__init__(message)
        self.category = category
        self.exit_code = exit_code


def _client(server: str | None) -> httpx.Client:
    if server is not None:
        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _load_config_text(config: str | None, preset: str | None) -> str:
    if (config is None) == (preset is None):
        raise CliFailure("config", "exactly one of --config/--preset is required", 2)
    if preset is not None:
        try:
            return scenarios.load_preset(preset)
        except scenarios.ConfigError as exc:
            raise CliFailure("config", str(exc), 2) from exc
    try:
        return Path(config).read_text()
    except OSError as exc:
        raise CliFailure("io", f"cannot read {config}: {exc}", 4) from exc


def _parse_overrides(pairs: tuple[str, ...]) -> dict[str, str]:
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise CliFailure("config", f"--set expects key=value, got {pair!r}", 2)
        key, _, val = pair.partition("=")
        overrides[key.strip()] = val.strip()
    return overrides


def _run(scenario: str, config: str | None, preset: str | None,
         out: str, sets: tuple[str, ...], server: str | None) -> None:
    config_text = _load_config_text(config, preset)
    overrides = _parse_overrides(sets)
    body = {
        "scenario": scenario,
        "config_text": config_text,
        "overrides": overrides,
    }
    if scenario == "fit":
        # ship the spectrum payload so the service never touches client disk
        cfg = _parse_client_side(config_text, overrides)
        if cfg.input_csv is None:
            raise CliFailure("config", "fit needs input_csv in the config", 2)
        try:
            body["fit_input_csv"] = Path(cfg.input_csv).read_text()
        except OSError as exc:
            raise CliFailure("io", f"cannot read {cfg.input_csv}: {exc}", 4) from exc
    try:
        with _client(server) as client:
            response = client.post("/run", json=body)
    except httpx.HTTPError as exc:
        raise CliFailure("server", f"request failed: {exc}", 5) from exc
    if response.status_code == 422:
        raise CliFailure("config", _detail(response), 2)
    if response.status_code != 200:
        category = "scenario" if response.status_code == 400 else "server"
        code = 3 if category == "scenario" else 5
        raise CliFailure(category, _detail(response), code)
    payload = response.json()
    out_dir = Path(out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, content in payload["files"].items():
            with open(out_dir / name, "w", newline="\n") as fh:
                fh.write(content)
    except OSError as exc:
        raise CliFailure("io", f"cannot write outputs: {exc}", 4) from exc
    rec = payload["record"]
    click.echo(
        f"{rec['scenario']}: wrote {', '.join(rec['files'])} to {out_dir} "
        f"(config {rec['config_hash'][:12]}, {rec['wall_time_s']:.2f}s)"
    )


def _parse_client_side(config_text: str, overrides: dict[str, str]):
    try:
        cfg = scenarios.parse_config(config_text)
        if overrides:
            cfg = scenarios.apply_overrides(cfg, overrides)
        return cfg
    except scenarios.ConfigError as exc:
        raise CliFailure("config", str(exc), 2) from exc


def _detail(response: httpx.Response) -> str:
    try:
        return str(response.json().get("detail", response.text))
    except ValueError:
        return response.text


@click.group()
def main():
    """Non-reciprocal cavity polariton simulator."""


def _scenario_command(name: str, help_text: str):
    @main.command(name=name, help=help_text)
    @click.option("--config", type=click.Path(), default=None,
                  help="Configuration file (key = value).")
    @click.option("--preset", type=str, default=None,
                  help=f"Bundled preset: {', '.join(scenarios.PRESET_NAMES)}.")
    @click.option("--out", type=click.Path(), default=".",
                  help="Directory for CSV outputs.")
    @click.option("--set", "sets", multiple=True, metavar="KEY=VALUE",
                  help="Override a config key (repeatable).")
    @click.option("--server", type=str, default=None,
                  help="Remote service URL; defaults to running in-process.")
    def command(config, preset, out, sets, server):
        try:
            _run(name, config, preset, out, sets, server)
        except CliFailure as failure:
            click.echo(f"error:{failure.category}: {failure}", err=True)
            sys.exit(failure.exit_code)

    return command


_scenario_command("spectrum", "Transmission and isolation versus probe detuning.")
_scenario_command("sweep2d", "Avoided-crossing map over probe and cavity-atom detuning.")
_scenario_command("isolation", "Ideal and master-equation isolation versus cooperativity.")
_scenario_command("saturation", "Steady-state output flux versus input flux, both branches.")
_scenario_command("g2", "Second-order correlation g2(tau) for both branches.")
_scenario_command("fit", "Fit the transmission model to a measured spectrum CSV.")
_scenario_command("cooperativity", "Cooperativities and dispersive shifts from populations.")


@main.command(name="serve", help="Run the HTTP service with uvicorn.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host: str, port: int):
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
