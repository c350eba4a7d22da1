"""Novel-view ambient sound synthesis on synthetic acoustic scenes."""

__version__ = "0.1.0"

from .scenes import Pose, SceneSpec
from .sim import (
    AmbisonicRecording,
    BinauralAudio,
    ImpulseResponse,
    VisualCapture,
    WalkableGrid,
)

__all__ = [
    "Pose",
    "SceneSpec",
    "AmbisonicRecording",
    "BinauralAudio",
    "ImpulseResponse",
    "VisualCapture",
    "WalkableGrid",
    "__version__",
]
