"""emslab - feedback-limited retransmission protocols over block-fading channels."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("emslab")
except PackageNotFoundError:
    __version__ = "unknown"
