"""Deployment-time verification and static gas bounds."""

from __future__ import annotations

from .gas import COSTS, CostTable, gas_bound, oracle_bound
from .verify import Rejection, VerifiedModule, validate

__all__ = ["COSTS", "CostTable", "gas_bound", "oracle_bound", "Rejection", "VerifiedModule", "validate"]
