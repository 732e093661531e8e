"""objsync: replicated-object state synchronization over delta-edge version graphs.

Each node keeps a snapshot (the heap application code reads and writes) and
one version graph per tracked type.  Commit moves staged changes into the
graph, checkout folds new graph edges into the snapshot, and push/fetch/pull
exchange squashed deltas with peers, with programmable three-way conflict
resolution on the receiving graph.
"""

from .dataframe import (
    CheckoutReport,
    CommitReport,
    Dataframe,
    FetchReport,
    PushReport,
    RemoteHandle,
)
from .errors import (
    ConfigError,
    DuplicateObject,
    DuplicateType,
    FetchRejected,
    MalformedFrame,
    ObjSyncError,
    PushRejected,
    ResolverFault,
    SubscriptionError,
    TransportError,
    UnknownDimension,
    UnknownObject,
    UnknownType,
    UnknownVersion,
    VersionMismatch,
)
from .graph import Edge, GcReport, PutOutcome, ROOT, VersionGraph, seeded_id_factory
from .merge import ConflictEntry, MergeResult, Resolution, Resolver, default_resolver, detect_conflicts
from .model import (
    Delta,
    ObjectDelta,
    ObjectId,
    ObjectState,
    TypeDescriptor,
    TypeRegistry,
    apply_delta,
    compose,
    delta_from_canonical,
    delta_to_canonical,
    difference,
    union,
)
from .snapshot import Snapshot
from .transport import TCPTransport, direct_transport, serve

__all__ = [
    "CheckoutReport",
    "CommitReport",
    "ConfigError",
    "ConflictEntry",
    "Dataframe",
    "Delta",
    "DuplicateObject",
    "DuplicateType",
    "Edge",
    "FetchRejected",
    "FetchReport",
    "GcReport",
    "MalformedFrame",
    "MergeResult",
    "ObjSyncError",
    "ObjectDelta",
    "ObjectId",
    "ObjectState",
    "PushRejected",
    "PushReport",
    "PutOutcome",
    "RemoteHandle",
    "ResolverFault",
    "Resolution",
    "Resolver",
    "ROOT",
    "Snapshot",
    "SubscriptionError",
    "TCPTransport",
    "TransportError",
    "TypeDescriptor",
    "TypeRegistry",
    "UnknownDimension",
    "UnknownObject",
    "UnknownType",
    "UnknownVersion",
    "VersionGraph",
    "VersionMismatch",
    "apply_delta",
    "compose",
    "default_resolver",
    "delta_from_canonical",
    "delta_to_canonical",
    "detect_conflicts",
    "difference",
    "direct_transport",
    "seeded_id_factory",
    "serve",
    "union",
]
