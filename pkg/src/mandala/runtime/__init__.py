"""Deterministic execution of deployed modules."""

from __future__ import annotations

from .engine import Arg, DeployError, DuplicateModule, Engine, Receipt, TxRejected
from .interp import CallFailed, InternalFault, Interpreter, RiskError, Stats, cell_key, external_id

__all__ = [
    "Arg",
    "CallFailed",
    "DeployError",
    "DuplicateModule",
    "Engine",
    "InternalFault",
    "Interpreter",
    "Receipt",
    "RiskError",
    "Stats",
    "TxRejected",
    "cell_key",
    "external_id",
]
