"""Instance files, seeded generators and experiment configuration.

Instance JSON::

    {"alpha": 1.0,
     "clients": ["x0", ...], "servers": ["y0", ...],
     "metric": {"type": "euclidean", "coords": [[...], ...]}      # clients first
             | {"type": "matrix", "d": [[...], ...]}             # clients first
             | {"type": "graph", "edges": [["x0", "y1", 0.5], ...]},
     "demands": 2 | [1, 2, ...],
     "k": 2,        # optional uniform demand for uniform / budgeted runs
     "t": 3}        # optional server budget

Euclidean coordinates may also be a mapping from point id to coordinates.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import InputError, SchemaError
from .metric import DemandProfile, MetricInstance

METRIC_FAMILIES = ("euclidean2d", "graph")
MODES = ("uniform", "nonuniform", "tmmc")


class LoadedInstance(NamedTuple):
    inst: MetricInstance
    dem: DemandProfile
    t: int | None
    k: int | None = None

    def uniform_k(self) -> int:
        """The uniform demand: the explicit ``k`` field, else the common demand."""
        if self.k is not None:
            return self.k
        if self.dem.uniform:
            return self.dem[0]
        raise SchemaError("instance has non-uniform demands and no 'k' field")


def _require(doc: dict, key: str, kind, what: str):
    if key not in doc:
        raise SchemaError(f"missing field {key!r}")
    val = doc[key]
    if not isinstance(val, kind) or isinstance(val, bool):
        raise SchemaError(f"field {key!r} must be {what}, got {type(val).__name__}")
    return val


def _int_field(doc: dict, key: str) -> int | None:
    if key not in doc or doc[key] is None:
        return None
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(f"field {key!r} must be an integer")
    return v


def instance_from_dict(doc: dict) -> LoadedInstance:
    if not isinstance(doc, dict):
        raise SchemaError("instance must be a JSON object")
    alpha = _require(doc, "alpha", (int, float), "a number")
    clients = _require(doc, "clients", list, "a list of ids")
    servers = _require(doc, "servers", list, "a list of ids")
    for p in clients + servers:
        if not isinstance(p, (str, int)) or isinstance(p, bool):
            raise SchemaError(f"point ids must be strings or integers, got {p!r}")
    metric = _require(doc, "metric", dict, "an object")
    kind = metric.get("type")
    if kind == "euclidean":
        coords = metric.get("coords")
        if isinstance(coords, dict):
            missing = [p for p in clients + servers if str(p) not in coords]
            if missing:
                raise SchemaError(f"no coordinates for {missing[:3]}")
            coords = [coords[str(p)] for p in clients + servers]
        if not isinstance(coords, list):
            raise SchemaError("euclidean metric needs 'coords'")
        try:
            pts = np.asarray(coords, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad coordinates: {exc}") from None
        inst = MetricInstance.from_coords(clients, servers, pts, alpha)
    elif kind == "matrix":
        d = metric.get("d")
        if not isinstance(d, list):
            raise SchemaError("matrix metric needs 'd'")
        try:
            arr = np.asarray(d, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad distance matrix: {exc}") from None
        inst = MetricInstance.from_matrix(clients, servers, arr, alpha)
    elif kind == "graph":
        edges = metric.get("edges")
        if not isinstance(edges, list):
            raise SchemaError("graph metric needs 'edges'")
        inst = MetricInstance.from_edges(clients, servers, edges, alpha)
    else:
        raise SchemaError(f"unknown metric type {kind!r}")
    if "demands" not in doc:
        raise SchemaError("missing field 'demands'")
    raw = doc["demands"]
    if isinstance(raw, dict):
        raw = [raw.get(str(p)) for p in clients]
    if isinstance(raw, bool) or not isinstance(raw, (int, list)):
        raise SchemaError("'demands' must be an integer or a list")
    dem = DemandProfile.for_instance(inst, raw)
    k = _int_field(doc, "k")
    if k is not None:
        DemandProfile.for_instance(inst, k)
    t = _int_field(doc, "t")
    if t is not None and t < 1:
        raise SchemaError(f"budget t must be positive, got {t}")
    return LoadedInstance(inst, dem, t, k)


def load_instance(path: str | Path) -> LoadedInstance:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None
    return instance_from_dict(doc)


def instance_to_dict(inst: MetricInstance, dem: DemandProfile | int, t: int | None = None, k: int | None = None) -> dict:
    if inst.coords is not None:
        metric = {"type": "euclidean", "coords": inst.coords.tolist()}
    else:
        metric = {"type": "matrix", "d": inst.dist.tolist()}
    demands = dem if isinstance(dem, int) else (dem[0] if dem.uniform else list(dem.demands))
    doc = {
        "alpha": inst.alpha,
        "clients": list(inst.clients),
        "servers": list(inst.servers),
        "metric": metric,
        "demands": demands,
    }
    if k is not None:
        doc["k"] = k
    if t is not None:
        doc["t"] = t
    return doc


def dumps(doc: dict) -> str:
    """Canonical JSON text: sorted keys, fixed separators, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def digest(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def save_instance(path: str | Path, inst: MetricInstance, dem: DemandProfile | int, t: int | None = None, k: int | None = None) -> None:
    Path(path).write_text(dumps(instance_to_dict(inst, dem, t, k)))


# --- experiment configuration ------------------------------------------------------


def _pair(v, name: str) -> tuple[int, int]:
    if isinstance(v, int) and not isinstance(v, bool):
        v = (v, v)
    if not (isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(a, int) for a in v)):
        raise SchemaError(f"{name} must be an integer or a [lo, hi] pair")
    lo, hi = v
    if not 1 <= lo <= hi:
        raise SchemaError(f"{name} must satisfy 1 <= lo <= hi, got {v}")
    return int(lo), int(hi)


@dataclass(frozen=True)
class ExperimentConfig:
    trials: int = 10
    seed: int = 0
    clients: tuple[int, int] = (2, 6)
    servers: tuple[int, int] = (2, 8)
    demands: tuple[int, int] = (1, 4)  # range for k and for per-client demands
    alphas: tuple[float, ...] = (1.0, 2.0)
    family: str = "euclidean2d"
    modes: tuple[str, ...] = MODES
    subroutines: tuple[str, ...] = ("exact",)
    edge_prob: float = 0.3  # extra-edge probability for the graph family
    oracle_guard: int = 10**7

    def __post_init__(self):
        if isinstance(self.trials, bool) or not isinstance(self.trials, int) or self.trials < 0:
            raise SchemaError("trials must be a nonnegative integer")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise SchemaError("seed must be a nonnegative integer")
        object.__setattr__(self, "clients", _pair(self.clients, "clients"))
        object.__setattr__(self, "servers", _pair(self.servers, "servers"))
        object.__setattr__(self, "demands", _pair(self.demands, "demands"))
        if not self.alphas or any(not isinstance(a, (int, float)) or a < 1 for a in self.alphas):
            raise SchemaError("alphas must be a nonempty list of numbers >= 1")
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if self.family not in METRIC_FAMILIES:
            raise SchemaError(f"family must be one of {METRIC_FAMILIES}")
        object.__setattr__(self, "modes", tuple(self.modes))
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise SchemaError(f"unknown modes {bad}")
        object.__setattr__(self, "subroutines", tuple(self.subroutines))
        bad = [s for s in self.subroutines if s not in ("greedy", "exact")]
        if bad:
            raise SchemaError(f"unknown subroutines {bad}")
        if not 0 <= self.edge_prob <= 1:
            raise SchemaError("edge_prob must lie in [0, 1]")

    @classmethod
    def from_dict(cls, doc: dict) -> ExperimentConfig:
        if not isinstance(doc, dict):
            raise SchemaError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise SchemaError(f"unknown config fields {sorted(extra)}")
        return cls(**doc)

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except FileNotFoundError:
            raise InputError(f"no such file: {path}") from None
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from None

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("clients", "servers", "demands", "alphas", "modes", "subroutines"):
            out[key] = list(out[key])
        return out


def generate_instance(cfg: ExperimentConfig, trial: int) -> dict:
    """Instance document for one trial; depends only on (cfg, seed, trial)."""
    rng = np.random.default_rng([cfg.seed, trial])
    n = int(rng.integers(cfg.clients[0], cfg.clients[1] + 1))
    m = int(rng.integers(cfg.servers[0], cfg.servers[1] + 1))
    alpha = float(cfg.alphas[int(rng.integers(len(cfg.alphas)))])
    lo, hi = cfg.demands
    clamped = hi > m
    hi = min(hi, m)
    lo = min(lo, hi)
    k = int(rng.integers(lo, hi + 1))
    demands = [int(v) for v in rng.integers(lo, hi + 1, size=n)]
    t = int(rng.integers(k, m + 1))
    clients = [f"x{i}" for i in range(n)]
    servers = [f"y{j}" for j in range(m)]
    if cfg.family == "euclidean2d":
        metric = {"type": "euclidean", "coords": rng.random((n + m, 2)).tolist()}
    else:
        labels = clients + servers
        edges = []
        for v in range(1, n + m):
            u = int(rng.integers(v))
            edges.append([labels[u], labels[v], float(rng.random())])
        tree = {(min(a, b), max(a, b)) for a, b in ((labels.index(e[0]), labels.index(e[1])) for e in edges)}
        for a in range(n + m):
            for b in range(a + 1, n + m):
                if (a, b) not in tree and rng.random() < cfg.edge_prob:
                    edges.append([labels[a], labels[b], float(rng.random())])
        metric = {"type": "graph", "edges": edges}
    meta = {"seed": cfg.seed, "trial": trial, "family": cfg.family}
    if clamped:
        meta["demand_clamp"] = {"requested": cfg.demands[1], "used": hi}
    return {
        "alpha": alpha,
        "clients": clients,
        "servers": servers,
        "metric": metric,
        "demands": demands,
        "k": k,
        "t": t,
        "meta": meta,
    }

