from .app import create_app, build_plane
from .config import GatewayConfig

__all__ = ["create_app", "build_plane", "GatewayConfig"]
