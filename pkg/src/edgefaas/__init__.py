"""edgefaas: a federated FaaS control plane for IoT, edge, and cloud
resources with locality-aware scheduling and virtualized object storage."""

from .control import ControlPlane

__version__ = "0.1.0"

__all__ = ["ControlPlane", "__version__"]
