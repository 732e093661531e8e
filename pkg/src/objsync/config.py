"""Node configuration files: simple ``key = value`` lines.

Recognized keys::

    name = physics            # node name (required)
    listen = 127.0.0.1:8700   # bind address for the server endpoint
    types = Player,Ship,Asteroid
    resolver = keep_mine      # keep_mine | keep_theirs | producer_policy
    gc = on                   # on | off
    auto_resync = off         # retry once from the root after a rejection
    remote.<name> = got://host:port/race

Lines starting with ``#`` are comments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .dataframe import Dataframe
from .errors import ConfigError
from .model import TypeRegistry
from .workload import game_registry, producer_policy


@dataclass
class NodeConfig:
    name: str
    listen: Optional[str] = None
    types: list[str] = field(default_factory=list)
    resolver: str = "keep_mine"
    gc_enabled: bool = True
    auto_resync: bool = False
    remotes: dict[str, str] = field(default_factory=dict)


def _parse_bool(raw: str, key: str) -> bool:
    if raw in ("on", "true", "yes", "1"):
        return True
    if raw in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"{key} must be on or off, got {raw!r}")


def parse_node_config(path: str | Path) -> NodeConfig:
    values: dict[str, str] = {}
    remotes: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key.startswith("remote."):
            remotes[key[len("remote."):]] = raw
        else:
            values[key] = raw
    if "name" not in values:
        raise ConfigError(f"{path}: missing required key 'name'")
    cfg = NodeConfig(name=values["name"], remotes=remotes)
    cfg.listen = values.get("listen")
    if "types" in values:
        cfg.types = [t.strip() for t in values["types"].split(",") if t.strip()]
    cfg.resolver = values.get("resolver", "keep_mine")
    if cfg.resolver not in ("keep_mine", "keep_theirs", "producer_policy"):
        raise ConfigError(f"unknown resolver strategy: {cfg.resolver!r}")
    if "gc" in values:
        cfg.gc_enabled = _parse_bool(values["gc"], "gc")
    if "auto_resync" in values:
        cfg.auto_resync = _parse_bool(values["auto_resync"], "auto_resync")
    return cfg


def build_dataframe(
    cfg: NodeConfig, registry: Optional[TypeRegistry] = None, transport=None
) -> Dataframe:
    registry = registry or game_registry()
    resolver = producer_policy() if cfg.resolver == "producer_policy" else cfg.resolver
    types = cfg.types or registry.names()
    df = Dataframe(
        cfg.name,
        registry,
        types=types,
        resolver=resolver,
        gc_enabled=cfg.gc_enabled,
        auto_resync=cfg.auto_resync,
        transport=transport,
    )
    for name, address in cfg.remotes.items():
        df.add_remote(name, address)
    return df
