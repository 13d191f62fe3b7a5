"""Exception taxonomy shared by all control-plane modules.

Every error the gateway can surface maps onto one of these classes; the
HTTP layer translates them to status codes (409 conflicts, 422 validation,
404 unknown entities, 502 backend failures).
"""

from __future__ import annotations


class EdgeFaasError(Exception):
    """Base class for all control-plane errors."""


# -- registry ---------------------------------------------------------------

class MalformedManifest(EdgeFaasError):
    """Registration manifest is missing fields or a field fails to parse."""


class DuplicateEndpoint(EdgeFaasError):
    """A resource with the same FaaS gateway endpoint is already registered."""


class UnknownResource(EdgeFaasError):
    pass


class ResourceBusy(EdgeFaasError):
    """Unregistration blocked: deployed functions or buckets still reference
    the resource."""

    def __init__(self, resource_id: int, reasons: list[str]):
        super().__init__(f"resource {resource_id} is busy: {', '.join(reasons)}")
        self.resource_id = resource_id
        self.reasons = reasons


# -- metrics ----------------------------------------------------------------

class MetricsUnavailable(EdgeFaasError):
    """Metrics endpoint unreachable or snapshot staler than the bound."""


class MismatchedResource(EdgeFaasError):
    """Snapshot does not belong to the resource it was paired with."""


# -- application model ------------------------------------------------------

class InvalidField(EdgeFaasError):
    pass


class CycleDetected(EdgeFaasError):
    pass


class UnknownDependency(EdgeFaasError):
    pass


class DuplicateApplication(EdgeFaasError):
    pass


class BadEntrypoint(EdgeFaasError):
    pass


class UnknownApplication(EdgeFaasError):
    pass


# -- scheduler --------------------------------------------------------------

class NoCandidates(EdgeFaasError):
    """Phase one left no resource; deployment must fail loudly."""


class NoTierCandidates(EdgeFaasError):
    """No candidate of the required node type survived phase one."""


class NoAnchors(EdgeFaasError):
    """Placement has nothing to anchor on (no data locations/dependency
    placements)."""


class UnknownPolicy(EdgeFaasError):
    pass


# -- functions --------------------------------------------------------------

class UnknownFunction(EdgeFaasError):
    pass


class PartialDeployFailure(EdgeFaasError):
    def __init__(self, qualified: str, failed: list[int]):
        super().__init__(f"{qualified}: deploy failed on resources {failed}")
        self.qualified = qualified
        self.failed = failed


class PartialDeleteFailure(EdgeFaasError):
    def __init__(self, qualified: str, failed: list[int]):
        super().__init__(f"{qualified}: delete failed on resources {failed}")
        self.qualified = qualified
        self.failed = failed


class InvokeFailure(EdgeFaasError):
    """Invocation failed; carries the scheduled resource id."""

    def __init__(self, resource_id: int, message: str):
        super().__init__(f"invoke failed on resource {resource_id}: {message}")
        self.resource_id = resource_id


class NotASuccessor(EdgeFaasError):
    pass


class BarrierTimeout(EdgeFaasError):
    pass


class UnknownInvocation(EdgeFaasError):
    """Async result expired or never existed."""


# -- storage ----------------------------------------------------------------

class InvalidBucketName(EdgeFaasError):
    pass


class BucketExists(EdgeFaasError):
    pass


class UnknownBucket(EdgeFaasError):
    pass


class BucketNotEmpty(EdgeFaasError):
    pass


class UnknownObject(EdgeFaasError):
    pass


class MalformedUrl(EdgeFaasError):
    pass


class MapMismatch(EdgeFaasError):
    """Object URL names a resource that disagrees with the bucket mapping;
    signals a stale URL after a placement change."""


class BackendWriteFailure(EdgeFaasError):
    pass


class PlacementFailed(EdgeFaasError):
    pass


class NoStorageCapacity(EdgeFaasError):
    pass


# -- harness ----------------------------------------------------------------

class UnknownStage(EdgeFaasError):
    pass


# -- backends ---------------------------------------------------------------

class Unreachable(EdgeFaasError):
    pass


class BackendRejected(EdgeFaasError):
    pass


class NoLink(EdgeFaasError):
    pass


# -- persistence / gateway --------------------------------------------------

class CorruptStore(EdgeFaasError):
    """Durable mapping store failed to load; writes are refused."""


class IoFailure(EdgeFaasError):
    pass
