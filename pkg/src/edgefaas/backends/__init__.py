from .base import FaasProvider, InvocationResult, ObjectStoreBackend
from .sim import (
    FabricTopology,
    ScheduledEvent,
    SimFabric,
    SyntheticFunction,
    TraceEvent,
    VirtualClock,
    build_package,
    virtual_clock_run,
)

__all__ = [
    "FaasProvider",
    "InvocationResult",
    "ObjectStoreBackend",
    "FabricTopology",
    "ScheduledEvent",
    "SimFabric",
    "SyntheticFunction",
    "TraceEvent",
    "VirtualClock",
    "build_package",
    "virtual_clock_run",
]
