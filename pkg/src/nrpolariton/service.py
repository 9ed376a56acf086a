"""HTTP front end for the simulator.

The service accepts a config (text form, identical to the file format) plus
optional key=value overrides, runs one scenario, and returns the CSV
payloads inline so clients control where bytes are written.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__, scenarios


class RunRequest(BaseModel):
    scenario: str | None = Field(
        default=None, description="Scenario name; falls back to the config's own."
    )
    config_text: str = Field(description="Configuration in key = value form.")
    overrides: dict[str, str] = Field(
        default_factory=dict, description="key=value overrides applied after parsing."
    )
    fit_input_csv: str | None = Field(
        default=None,
        description="Spectrum CSV payload for the fit scenario (delta_mhz, t_plus).",
    )


class RunRecordModel(BaseModel):
    scenario: str
    config_hash: str
    wall_time_s: float
    files: list[str]


class RunResponse(BaseModel):
    record: RunRecordModel
    files: dict[str, str]


class PresetResponse(BaseModel):
    name: str
    config_text: str


app = FastAPI(title="nrpolariton", version=__version__)


@app.get("/health")
def health() -> dict[str, str]:
    return {"status": "ok", "version": __version__}


@app.get("/scenarios")
def list_scenarios() -> list[str]:
    return list(scenarios.SCENARIOS)


@app.get("/presets")
def list_presets() -> list[str]:
    return list(scenarios.PRESET_NAMES)


@app.get("/presets/{name}", response_model=PresetResponse)
def get_preset(name: str) -> PresetResponse:
    try:
        text = scenarios.load_preset(name)
    except scenarios.ConfigError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc
    return PresetResponse(name=name, config_text=text)


@app.post("/run", response_model=RunResponse)
def run(request: RunRequest) -> RunResponse:
    try:
        config = scenarios.parse_config(request.config_text)
        if request.overrides:
            config = scenarios.apply_overrides(config, request.overrides)
    except scenarios.ConfigError as exc:
        raise HTTPException(status_code=422, detail=f"config: {exc}") from exc
    try:
        result = scenarios.run_scenario(
            config, request.scenario, fit_input_text=request.fit_input_csv
        )
    except scenarios.ScenarioError as exc:
        raise HTTPException(status_code=400, detail=f"scenario: {exc}") from exc
    rec = result.record
    return RunResponse(
        record=RunRecordModel(
            scenario=rec.scenario, config_hash=rec.config_hash,
            wall_time_s=rec.wall_time_s, files=list(rec.files),
        ),
        files=result.files,
    )
