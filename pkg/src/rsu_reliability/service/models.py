"""Request and response bodies of the estimation service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class SimulateRequest(BaseModel):
    config: dict
    overrides: list[str] = Field(default_factory=list)


class CommissionRequest(BaseModel):
    streams: list[str] = Field(min_length=1)


class EstimateRequest(BaseModel):
    config: dict
    overrides: list[str] = Field(default_factory=list)
    stream: str
    reference: str
    label: Optional[str] = None
    scenario_id: Optional[str] = None


class EvaluateRequest(BaseModel):
    verdicts: list[str] = Field(min_length=1)


class FileBundle(BaseModel):
    """Named output files as exact text, plus a short machine summary."""

    files: dict[str, str]
    summary: dict


class HealthResponse(BaseModel):
    status: str
    version: str
