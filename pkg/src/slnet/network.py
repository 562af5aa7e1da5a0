"""Networks of arcs joined at nodes, their uniform grids and scenario files.

Each arc is parameterised by arc length ``s`` running from its ``from`` node
(``s = 0``) to its ``to`` node (``s = length``).  Node positions only matter
for output.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .hamiltonian import MINUS_INFINITY, LagrangianSpec, lagrangian_from_dict, lagrangian_to_dict

BC_KINDS = ("dirichlet", "neumann", "outflow")
COMMENSURATE_TOL = 1e-9


class NetworkError(ValueError):
    """Raised for malformed networks, scenario files and grids."""


@dataclass(frozen=True)
class BoundaryCondition:
    """Data at a boundary node.

    ``dirichlet``: the value of ``u``.  ``neumann``: the outward derivative of
    ``u``.  ``outflow``: a state constraint, trajectories may not leave and no
    value is imposed.  ``value`` is a constant or a ``(times, values)`` table
    interpolated linearly and held constant outside its range.
    """

    kind: str
    value: Union[float, Tuple[Tuple[float, ...], Tuple[float, ...]]] = 0.0

    def __post_init__(self):
        if self.kind not in BC_KINDS:
            raise NetworkError(f"unknown boundary condition kind {self.kind!r}")
        if isinstance(self.value, (int, float)):
            if not math.isfinite(self.value):
                raise NetworkError("boundary value must be finite")
            object.__setattr__(self, "value", float(self.value))
        else:
            ts, vs = (tuple(float(x) for x in part) for part in self.value)
            if len(ts) != len(vs) or not ts:
                raise NetworkError("tabulated boundary data needs matching, non-empty times and values")
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise NetworkError("boundary data times must increase")
            if not all(math.isfinite(x) for x in ts + vs):
                raise NetworkError("boundary value must be finite")
            object.__setattr__(self, "value", (ts, vs))

    def at(self, t: float) -> float:
        if isinstance(self.value, float):
            return self.value
        ts, vs = self.value
        return float(np.interp(t, ts, vs))


@dataclass(frozen=True)
class Node:
    id: str
    kind: str = "junction"
    A: float = MINUS_INFINITY
    bc: Optional[BoundaryCondition] = None
    position: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("junction", "boundary"):
            raise NetworkError(f"node {self.id}: kind must be junction or boundary")
        if self.kind == "junction" and self.bc is not None:
            raise NetworkError(f"node {self.id}: a junction carries no boundary condition")
        if self.kind == "boundary" and self.bc is None:
            raise NetworkError(f"node {self.id}: a boundary node needs a boundary condition")
        if math.isnan(self.A) or self.A == math.inf:
            raise NetworkError(f"node {self.id}: flux limiter must be real or -inf")

    @property
    def staying_cost(self) -> float:
        return -self.A


@dataclass(frozen=True)
class Arc:
    id: str
    tail: str
    head: str
    length: float
    lagrangian: LagrangianSpec

    def __post_init__(self):
        if self.tail == self.head:
            raise NetworkError(f"arc {self.id}: endpoints must differ")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise NetworkError(f"arc {self.id}: length must be positive and finite")


@dataclass(frozen=True)
class Network:
    nodes: Tuple[Node, ...]
    arcs: Tuple[Arc, ...]

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise NetworkError("duplicate node id")
        if len({a.id for a in self.arcs}) != len(self.arcs):
            raise NetworkError("duplicate arc id")
        if not self.arcs:
            raise NetworkError("network has no arcs")
        known = set(ids)
        degree = {i: 0 for i in ids}
        for a in self.arcs:
            for end in (a.tail, a.head):
                if end not in known:
                    raise NetworkError(f"arc {a.id}: unknown node {end!r}")
                degree[end] += 1
        for n in self.nodes:
            if n.kind == "boundary" and degree[n.id] != 1:
                raise NetworkError(f"boundary node {n.id} has {degree[n.id]} incident arcs, needs exactly 1")
            if degree[n.id] == 0:
                raise NetworkError(f"node {n.id} is isolated")
        idx = self.node_index
        rows = [idx[a.tail] for a in self.arcs]
        cols = [idx[a.head] for a in self.arcs]
        adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(ids), len(ids)))
        if connected_components(adj, directed=False)[0] != 1:
            raise NetworkError("network is not connected")

    @property
    def node_index(self) -> Dict[str, int]:
        return {n.id: i for i, n in enumerate(self.nodes)}

    @property
    def arc_index(self) -> Dict[str, int]:
        return {a.id: i for i, a in enumerate(self.arcs)}

    def node(self, node_id: str) -> Node:
        return self.nodes[self.node_index[node_id]]

    def arc(self, arc_id: str) -> Arc:
        return self.arcs[self.arc_index[arc_id]]

    def incident(self, node_id: str) -> List[Tuple[int, int]]:
        """``(arc index, sign)`` pairs, sign +1 where the arc starts at the node."""
        out = []
        for i, a in enumerate(self.arcs):
            if a.tail == node_id:
                out.append((i, 1))
            if a.head == node_id:
                out.append((i, -1))
        return out

    def replace(self, *, A: Optional[float] = None, nodes: Optional[Sequence[Node]] = None,
                arcs: Optional[Sequence[Arc]] = None) -> "Network":
        """Copy with every junction limiter set to ``A`` and/or new node/arc lists."""
        new_nodes = tuple(nodes) if nodes is not None else self.nodes
        if A is not None:
            new_nodes = tuple(Node(n.id, n.kind, float(A), n.bc, n.position) if n.kind == "junction" else n
                              for n in new_nodes)
        return Network(new_nodes, tuple(arcs) if arcs is not None else self.arcs)

    def node_distances(self) -> np.ndarray:
        """All-pairs shortest path lengths between nodes along arcs."""
        n = len(self.nodes)
        best: Dict[Tuple[int, int], float] = {}
        idx = self.node_index
        for a in self.arcs:
            key = (idx[a.tail], idx[a.head])
            best[key] = min(best.get(key, math.inf), a.length)
        rows, cols, w = zip(*((i, j, d) for (i, j), d in best.items()))
        return dijkstra(csr_matrix((w, (rows, cols)), shape=(n, n)), directed=False)


ArcPoint = Tuple[str, float]


def geodesic_distance(net: Network, x: ArcPoint, y: ArcPoint, _dist: Optional[np.ndarray] = None) -> float:
    """Length of the shortest path along arcs between ``(arc id, s)`` points."""
    ax, sx = net.arc(x[0]), float(x[1])
    ay, sy = net.arc(y[0]), float(y[1])
    for a, s in ((ax, sx), (ay, sy)):
        if not (-COMMENSURATE_TOL <= s <= a.length + COMMENSURATE_TOL):
            raise NetworkError(f"position {s} outside arc {a.id}")
    dist = net.node_distances() if _dist is None else _dist
    idx = net.node_index
    ends_x = ((idx[ax.tail], sx), (idx[ax.head], ax.length - sx))
    ends_y = ((idx[ay.tail], sy), (idx[ay.head], ay.length - sy))
    best = abs(sx - sy) if ax.id == ay.id else math.inf
    for nx, dx in ends_x:
        for ny, dy in ends_y:
            best = min(best, dx + dist[nx, ny] + dy)
    return float(best)


# ----------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class Grid:
    """Uniform samples on every arc; endpoint samples are shared through the nodes.

    Global numbering puts node samples first (in node order) followed by the
    interior samples of each arc.
    """

    net: Network
    dx: float
    arc_n: np.ndarray
    arc_h: np.ndarray
    arc_ptr: np.ndarray
    arc_g: np.ndarray

    @property
    def n_samples(self) -> int:
        return len(self.net.nodes) + int(np.sum(self.arc_n - 1))

    def arc_samples(self, arc: Union[int, str]) -> Tuple[np.ndarray, np.ndarray]:
        """``(s, global index)`` of every sample on an arc, endpoints included."""
        a = self.net.arc_index[arc] if isinstance(arc, str) else int(arc)
        n = int(self.arc_n[a])
        return np.arange(n + 1) * self.arc_h[a], self.arc_g[self.arc_ptr[a]:self.arc_ptr[a] + n + 1]

    def node_sample(self, node_id: str) -> int:
        return self.net.node_index[node_id]

    def sample_table(self):
        """Every (arc index, s, global index, x, y) row, arcs in order, endpoints included."""
        rows = []
        idx = self.net.node_index
        for a, arc in enumerate(self.net.arcs):
            s, g = self.arc_samples(a)
            p0 = np.asarray(self.net.nodes[idx[arc.tail]].position, float)
            p1 = np.asarray(self.net.nodes[idx[arc.head]].position, float)
            frac = s / arc.length
            xy = p0[None, :] + frac[:, None] * (p1 - p0)[None, :]
            rows.append((np.full(s.size, a), s, g, xy[:, 0], xy[:, 1]))
        return tuple(np.concatenate(col) for col in zip(*rows))

    def positions(self) -> np.ndarray:
        """Cosmetic (x, y) for every global sample."""
        _, _, g, x, y = self.sample_table()
        out = np.zeros((self.n_samples, 2))
        out[g, 0] = x
        out[g, 1] = y
        return out

    def arc_coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """For each global sample one representative (arc index, s); nodes use their first arc."""
        a, s, g, _, _ = self.sample_table()
        arc = np.full(self.n_samples, -1)
        pos = np.zeros(self.n_samples)
        uniq, first = np.unique(g, return_index=True)
        arc[uniq] = a[first]
        pos[uniq] = s[first]
        return arc, pos

    def sample(self, fn) -> "GridFunction":
        """Evaluate ``fn(arc_index, s, x, y)`` (vectorised) at every sample."""
        a, s, g, x, y = self.sample_table()
        vals = np.asarray(fn(a, s, x, y), float) * np.ones(s.shape)
        out = np.empty(self.n_samples)
        out[g] = vals
        return GridFunction(self, out, 0.0)


def build_grid(net: Network, dx: float, policy: str = "strict") -> Grid:
    """Discretise every arc with spacing ``dx``.

    ``strict`` requires every length to be an integer multiple of ``dx``.
    ``fit`` instead uses the largest spacing ``<= dx`` that divides each arc.
    """
    if not (dx > 0 and math.isfinite(dx)):
        raise NetworkError(f"dx must be positive, got {dx}")
    if policy not in ("strict", "fit"):
        raise NetworkError(f"unknown grid policy {policy!r}")
    n_nodes = len(net.nodes)
    idx = net.node_index
    arc_n, arc_h, arc_ptr, arc_g = [], [], [0], []
    nxt = n_nodes
    for arc in net.arcs:
        ratio = arc.length / dx
        n = int(round(ratio))
        if policy == "strict":
            if n < 1 or abs(ratio - n) > COMMENSURATE_TOL * max(1.0, ratio):
                raise NetworkError(f"arc {arc.id}: length {arc.length} is not a multiple of dx = {dx}")
        else:
            n = max(1, int(math.ceil(ratio - COMMENSURATE_TOL * max(1.0, ratio))))
        arc_n.append(n)
        arc_h.append(arc.length / n)
        arc_g.append(idx[arc.tail])
        arc_g.extend(range(nxt, nxt + n - 1))
        nxt += n - 1
        arc_g.append(idx[arc.head])
        arc_ptr.append(arc_ptr[-1] + n + 1)
    return Grid(net, float(dx), np.array(arc_n, dtype=np.int64), np.array(arc_h, float),
                np.array(arc_ptr, dtype=np.int64), np.array(arc_g, dtype=np.int64))


@dataclass(frozen=True)
class GridFunction:
    """One value per grid sample at time ``t``."""

    grid: Grid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, float)
        if vals.shape != (self.grid.n_samples,):
            raise NetworkError(f"expected {self.grid.n_samples} values, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise NetworkError("grid function has non-finite values")
        object.__setattr__(self, "values", vals)

    def on_arc(self, arc: Union[int, str]) -> Tuple[np.ndarray, np.ndarray]:
        s, g = self.grid.arc_samples(arc)
        return s, self.values[g]

    def at_node(self, node_id: str) -> float:
        return float(self.values[self.grid.node_sample(node_id)])

    def with_values(self, values, t=None) -> "GridFunction":
        return GridFunction(self.grid, values, self.t if t is None else t)


# ----------------------------------------------------------------------------
# scenario files


@dataclass
class Scenario:
    """A network plus everything needed to reproduce one run."""

    name: str
    net: Network
    params: Dict[str, Any] = field(default_factory=dict)
    initial: Dict[str, Any] = field(default_factory=dict)
    source: Optional[Path] = None


def _bc_from_dict(doc) -> BoundaryCondition:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise NetworkError("boundary condition needs a kind")
    val = doc.get("value", 0.0)
    if isinstance(val, dict):
        val = (tuple(val["times"]), tuple(val["values"]))
    return BoundaryCondition(doc["kind"], val)


def _float_or_neg_inf(x) -> float:
    if x is None:
        return MINUS_INFINITY
    if isinstance(x, str) and x.strip().lower() in ("-inf", "-infinity", "minus_infinity"):
        return MINUS_INFINITY
    return float(x)


def network_from_dict(doc: Dict[str, Any]) -> Network:
    try:
        nodes = []
        for nd in doc["nodes"]:
            kind = nd.get("kind", "junction")
            bc = _bc_from_dict(nd["bc"]) if nd.get("bc") is not None else None
            pos = tuple(float(x) for x in nd.get("position", (0.0, 0.0)))
            nodes.append(Node(str(nd["id"]), kind, _float_or_neg_inf(nd.get("A")), bc, pos))
        arcs = []
        for ad in doc["arcs"]:
            length = ad["length"]
            if isinstance(length, str) and length.strip().lower() in ("inf", "infinity", "unbounded"):
                if "truncate" not in ad:
                    raise NetworkError(f"arc {ad['id']}: unbounded arcs need a 'truncate' length")
                length = ad["truncate"]
            arcs.append(Arc(str(ad["id"]), str(ad["from"]), str(ad["to"]), float(length),
                            lagrangian_from_dict(ad["lagrangian"])))
    except (KeyError, TypeError) as exc:
        raise NetworkError(f"malformed scenario document: {exc!r}") from exc
    except ValueError as exc:
        if isinstance(exc, NetworkError):
            raise
        raise NetworkError(str(exc)) from exc
    return Network(tuple(nodes), tuple(arcs))


def network_to_dict(net: Network) -> Dict[str, Any]:
    nodes = []
    for n in net.nodes:
        d: Dict[str, Any] = {"id": n.id, "kind": n.kind, "position": list(n.position)}
        if n.kind == "junction":
            d["A"] = "-inf" if n.A == MINUS_INFINITY else n.A
        else:
            val = n.bc.value
            d["bc"] = {"kind": n.bc.kind,
                       "value": val if isinstance(val, float) else {"times": list(val[0]), "values": list(val[1])}}
        nodes.append(d)
    arcs = [{"id": a.id, "from": a.tail, "to": a.head, "length": a.length,
             "lagrangian": lagrangian_to_dict(a.lagrangian)} for a in net.arcs]
    return {"nodes": nodes, "arcs": arcs}


def _read_document(path: Path) -> Dict[str, Any]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise NetworkError(f"cannot read scenario {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise NetworkError(f"cannot parse scenario {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise NetworkError(f"scenario {path} is not a key-value document")
    return doc


def load_scenario(source: Union[str, Path, Dict[str, Any]]) -> Scenario:
    """Load a scenario from a dict, a YAML/JSON file, or a bundled name."""
    path = None
    if isinstance(source, dict):
        doc = source
    else:
        path = resolve_scenario_path(source)
        doc = _read_document(path)
    net = network_from_dict(doc)
    return Scenario(str(doc.get("name", path.stem if path else "scenario")), net,
                    dict(doc.get("params") or {}), dict(doc.get("initial") or {}), path)


def load_network(source: Union[str, Path, Dict[str, Any]]) -> Network:
    return load_scenario(source).net


BUNDLED_DIR = Path(__file__).parent / "scenarios"


def bundled_scenarios() -> List[str]:
    return sorted(p.stem for p in BUNDLED_DIR.glob("*.yaml"))


def resolve_scenario_path(source: Union[str, Path]) -> Path:
    path = Path(source)
    if path.exists():
        return path
    candidate = BUNDLED_DIR / f"{source}.yaml"
    if isinstance(source, str) and candidate.exists():
        return candidate
    raise NetworkError(f"scenario not found: {source}")
