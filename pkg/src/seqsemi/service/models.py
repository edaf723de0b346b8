"""Request and response bodies for the HTTP service."""

from __future__ import annotations

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict

from ..config import ExperimentConfig

__all__ = [
    "CheckInfo",
    "ChecksResponse",
    "RunRequest",
    "RunResponse",
    "SimulateRequest",
    "SimulateResponse",
    "ValidateRequest",
    "ValidateResponse",
    "VersionResponse",
]


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ExperimentConfig


class RunResponse(BaseModel):
    version: str
    all_pass: bool
    config: Dict[str, Any]
    reports: List[Dict[str, Any]]


class ValidateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    # Raw document: validation failures are the expected payload here, so
    # the endpoint must accept anything JSON-shaped and report back.
    config: Any


class ValidateResponse(BaseModel):
    valid: bool
    errors: List[str]


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ExperimentConfig


class SimulateResponse(BaseModel):
    version: str
    rows: List[Dict[str, Any]]


class CheckInfo(BaseModel):
    name: str
    description: str


class ChecksResponse(BaseModel):
    checks: List[CheckInfo]


class VersionResponse(BaseModel):
    version: str
