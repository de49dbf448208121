"""Service layer: file-backed store, pipeline configs, and the HTTP app.

``create_app`` is resolved lazily so CLI verbs that only need the config
loader or store never pay the web-framework import.
"""
from .config import CONFIG_SCHEMA_VERSION, load_pipeline_config
from .store import FileStore, StoreRecord

__all__ = ["CONFIG_SCHEMA_VERSION", "FileStore", "StoreRecord", "create_app", "load_pipeline_config"]


def __getattr__(name):
    if name == "create_app":
        from .app import create_app

        return create_app
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
