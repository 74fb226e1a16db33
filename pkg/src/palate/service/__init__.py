from .config import ServiceConfig
from .assets import AssetStore, DietAssets
from .sessions import SessionManager
from .app import create_app

__all__ = ["ServiceConfig", "AssetStore", "DietAssets", "SessionManager", "create_app"]
