"""Application catalog: four domains, two paradigms, three stages each."""

from __future__ import annotations

from ..sim import Scenario
from . import insurance_claims, mblogger, playlist_builder, ride_allocation
from .base import APP_STAGES, PARADIGMS, ApiRoute, AppVersion, FbpBuild, SoaBuild, StreamRoute

_MODULES = {
    "insurance_claims": insurance_claims,
    "mblogger": mblogger,
    "playlist_builder": playlist_builder,
    "ride_allocation": ride_allocation,
}

_WORLDS = {
    "insurance_claims": insurance_claims.ClaimsWorld,
    "mblogger": mblogger.BloggerWorld,
    "playlist_builder": playlist_builder.PlaylistWorld,
    "ride_allocation": ride_allocation.RideWorld,
}

APP_NAMES = tuple(sorted(_MODULES))


def app_version(app: str, paradigm: str, stage: str) -> AppVersion:
    if app not in _MODULES:
        raise ValueError(f"unknown app {app!r}")
    return AppVersion(app, paradigm, stage)


def default_params(app: str) -> dict:
    return dict(_MODULES[app].DEFAULT_PARAMS)


def make_scenario(app: str, ticks: int, seed: int, overrides: dict | None = None) -> Scenario:
    params = default_params(app)
    params.update(overrides or {})
    return Scenario(app=app, ticks=ticks, seed=seed, params=params)


def build_app(version: AppVersion, scenario: Scenario):
    module = _MODULES[version.app]
    if version.paradigm == "fbp":
        return module.build_fbp(version.stage, scenario)
    return module.build_soa(version.stage, scenario)


def make_world(scenario: Scenario):
    return _WORLDS[scenario.app](scenario)


__all__ = [
    "APP_NAMES",
    "APP_STAGES",
    "PARADIGMS",
    "ApiRoute",
    "AppVersion",
    "FbpBuild",
    "SoaBuild",
    "StreamRoute",
    "app_version",
    "build_app",
    "default_params",
    "make_scenario",
    "make_world",
]
