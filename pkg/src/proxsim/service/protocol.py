"""Wire protocol of the live service: client messages and server ticks.

Messages are JSON text with a ``type`` discriminator and a protocol version
``v``. Anything that fails validation gets an ``error`` reply and leaves the
simulation untouched.
"""

from __future__ import annotations

from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field

PROTOCOL_VERSION = 1

MAX_STEER_SPEED = 2.0


class _Msg(BaseModel):
    model_config = ConfigDict(extra="forbid")
    v: int = PROTOCOL_VERSION


class SteerMessage(_Msg):
    """Velocity command in the avatar's body frame: +forward along heading."""

    type: Literal["steer"]
    forward: float = 0.0
    strafe: float = 0.0
    heading_rate: float = 0.0


class SetOmegaMessage(_Msg):
    type: Literal["set_omega"]
    value: float = Field(ge=0.0, le=1.0)


class AddVoiMessage(_Msg):
    type: Literal["add_voi"]
    id: str = Field(min_length=1)
    x: float
    y: float
    radius: float = Field(default=0.05, gt=0.0)
    prior: float = Field(default=1.0, ge=0.0, le=1.0)


class MoveVoiMessage(_Msg):
    type: Literal["move_voi"]
    id: str
    x: float
    y: float


class RemoveVoiMessage(_Msg):
    type: Literal["remove_voi"]
    id: str


class SetPriorMessage(_Msg):
    type: Literal["set_prior"]
    id: str
    prior: float = Field(ge=0.0, le=1.0)


class PauseMessage(_Msg):
    type: Literal["pause"]


class ResumeMessage(_Msg):
    type: Literal["resume"]


class ResetMessage(_Msg):
    type: Literal["reset"]
    seed: int | None = None


class EstopMessage(_Msg):
    type: Literal["estop"]


class ReleaseEstopMessage(_Msg):
    type: Literal["release_estop"]


class SetTrackingMessage(_Msg):
    type: Literal["set_tracking"]
    lost: bool


class RecordStartMessage(_Msg):
    type: Literal["record_start"]
    path: str | None = None


class RecordStopMessage(_Msg):
    type: Literal["record_stop"]


ClientMessage = Annotated[
    Union[
        SteerMessage,
        SetOmegaMessage,
        AddVoiMessage,
        MoveVoiMessage,
        RemoveVoiMessage,
        SetPriorMessage,
        PauseMessage,
        ResumeMessage,
        ResetMessage,
        EstopMessage,
        ReleaseEstopMessage,
        SetTrackingMessage,
        RecordStartMessage,
        RecordStopMessage,
    ],
    Field(discriminator="type"),
]


class ClientEnvelope(BaseModel):
    """Validation entry point for one incoming message."""

    model_config = ConfigDict(extra="forbid")
    message: ClientMessage


class VoiView(BaseModel):
    id: str
    x: float
    y: float
    radius: float
    prior: float
    raw_weight: float | None = None
    effective_weight: float | None = None


class UserView(BaseModel):
    x: float
    y: float
    heading: float
    tracked: bool


class ProxyView(BaseModel):
    x: float
    y: float
    vx: float
    vy: float


class RobotView(BaseModel):
    x: float
    y: float
    vx: float
    vy: float
    status: str


class CommandView(BaseModel):
    x: float
    y: float
    degenerate: bool


class MetricsView(BaseModel):
    min_user_proxy_clearance: float | None = None
    last_detection_time: float | None = None
    last_contact_voi: str | None = None
    last_contact_distance: float | None = None
    last_contact_success: bool | None = None


class ServerTick(BaseModel):
    type: Literal["tick"] = "tick"
    v: int = PROTOCOL_VERSION
    t: float
    paused: bool
    omega: float
    arena_width: float
    arena_length: float
    user: UserView
    proxy: ProxyView
    robot: RobotView
    command: CommandView
    obstacle_radius: float
    vois: list[VoiView]
    metrics: MetricsView
    recording: str | None = None


class ErrorReply(BaseModel):
    type: Literal["error"] = "error"
    v: int = PROTOCOL_VERSION
    message: str


class AckReply(BaseModel):
    type: Literal["ok"] = "ok"
    v: int = PROTOCOL_VERSION
    applied: str
    detail: str | None = None


class WarningNotice(BaseModel):
    type: Literal["warning"] = "warning"
    v: int = PROTOCOL_VERSION
    message: str
