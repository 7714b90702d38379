"""In-memory reference implementation of the Conduit API contract."""

from .repository import Store
from .routes import FEATURE_GROUPS, dispatch
from .server import ServerHandle, build_server, serve

__all__ = ["Store", "FEATURE_GROUPS", "dispatch", "ServerHandle", "build_server", "serve"]
