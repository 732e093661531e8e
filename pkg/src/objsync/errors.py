"""Exception hierarchy for the objsync library."""


class ObjSyncError(Exception):
    """Base class for all objsync errors."""


class DuplicateType(ObjSyncError):
    """A type name was registered twice."""


class UnknownType(ObjSyncError):
    """A type name is not present in the registry."""


class DuplicateObject(ObjSyncError):
    """An object with this id is already visible in the snapshot."""


class UnknownObject(ObjSyncError):
    """No visible object with this id."""


class UnknownDimension(ObjSyncError):
    """The dimension is not declared on the object's type."""


class UnknownVersion(ObjSyncError):
    """The version id is not a vertex of the graph."""


class VersionMismatch(ObjSyncError):
    """A checkout was handed edges that do not start at the snapshot version."""


class ResolverFault(ObjSyncError):
    """The application merge function raised, or returned an invalid resolution."""


class SubscriptionError(ObjSyncError):
    """Type subscriptions are fixed before the first synchronization."""


class MalformedFrame(ObjSyncError):
    """A wire frame could not be decoded."""


class TransportError(ObjSyncError):
    """A network send/receive failed."""


class PushRejected(ObjSyncError):
    """The remote graph does not know our start version; the push was refused."""


class FetchRejected(ObjSyncError):
    """The remote graph does not know our last-known version; the fetch failed."""


class ConfigError(ObjSyncError):
    """A node configuration file or scenario config is invalid."""
