"""Persistent world state."""

from __future__ import annotations

from .state import Ledger, Loaded, ModuleRecord, PersistViolation
from .store import GENESIS_DIGEST, Store, StoreCorrupt, StoreLocked

__all__ = [
    "Ledger",
    "Loaded",
    "ModuleRecord",
    "PersistViolation",
    "Store",
    "StoreCorrupt",
    "StoreLocked",
    "GENESIS_DIGEST",
]
