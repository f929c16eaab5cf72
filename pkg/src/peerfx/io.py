"""Edge-list / node-table CSV files, TOML run configuration, key=value output."""

import csv
import math
import sys

import numpy as np

from ._fmt import fmt17
from .data import Dataset, GroupData
from .dgp import FormationConfig, StructuralParams
from .errors import ConfigError, DataError, GraphError
from .graph import build_graph
from .instruments import InstrumentSpec
from .montecarlo import McConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "load_dataset",
    "write_dataset",
    "load_config",
    "fit_lines",
    "fmt17",
    "EDGE_COLUMNS",
    "NODE_COLUMNS",
]

EDGE_COLUMNS = ("group_id", "i", "j")
NODE_COLUMNS = ("group_id", "node_id", "x", "y")


def _records(path, required, optional=()):
    """Yield ``(line_number, row_dict)`` from a headed CSV file."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open: {exc.strerror}", path) from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError("empty file, header row required", path, 1)
        header = [h.strip() for h in header]
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"header lacks columns {missing}", path, 1)
        unknown = [c for c in header if c not in required and c not in optional]
        if unknown:
            raise DataError(f"unknown columns {unknown}", path, 1)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"expected {len(header)} fields, got {len(row)}", path, line)
            yield line, {h: c.strip() for h, c in zip(header, row)}


def _int(value, name, path, line):
    try:
        return int(value)
    except ValueError:
        raise DataError(f"{name} must be an integer, got {value!r}", path, line) from None


def _float(value, name, path, line):
    try:
        v = float(value)
    except ValueError:
        raise DataError(f"{name} must be numeric, got {value!r}", path, line) from None
    if not math.isfinite(v):
        raise DataError(f"{name} must be finite, got {value!r}", path, line)
    return v


def load_dataset(edge_path, node_path):
    """Assemble a :class:`Dataset` from an edge list and a node table.

    Every agent must appear in the node table, including isolated ones. Node
    ids run from 0 to the group size minus one. A blank ``y`` cell (or no
    ``y`` column) leaves outcomes unset.
    """
    nodes = {}
    for line, rec in _records(node_path, NODE_COLUMNS[:3], NODE_COLUMNS[3:]):
        gid = rec["group_id"]
        if not gid:
            raise DataError("group_id is empty", node_path, line)
        node = _int(rec["node_id"], "node_id", node_path, line)
        x = _float(rec["x"], "x", node_path, line)
        y_raw = rec.get("y", "")
        y = _float(y_raw, "y", node_path, line) if y_raw != "" else None
        group = nodes.setdefault(gid, {})
        if node in group:
            raise DataError(
                f"duplicate record for node {node} of group {gid!r} "
                f"(first on line {group[node][0]})",
                node_path,
                line,
            )
        group[node] = (line, x, y)
    for gid, group in nodes.items():
        n = len(group)
        for node, (line, _, _) in group.items():
            if not 0 <= node < n:
                raise DataError(
                    f"node_id {node} outside 0..{n - 1} for group {gid!r} of {n} nodes",
                    node_path,
                    line,
                )
    edges = {gid: [] for gid in nodes}
    for line, rec in _records(edge_path, EDGE_COLUMNS):
        gid = rec["group_id"]
        i = _int(rec["i"], "i", edge_path, line)
        j = _int(rec["j"], "j", edge_path, line)
        if gid not in nodes:
            raise DataError(f"group {gid!r} has no records in the node file", edge_path, line)
        n = len(nodes[gid])
        for v in (i, j):
            if not 0 <= v < n:
                raise DataError(f"edge endpoint {v} is not a node of group {gid!r}", edge_path, line)
        if i == j:
            raise DataError(f"self-loop on node {i}", edge_path, line)
        edges[gid].append((i, j))
    groups = []
    for gid in sorted(nodes):
        group = nodes[gid]
        n = len(group)
        x = [group[k][1] for k in range(n)]
        ys = [group[k][2] for k in range(n)]
        present = [v is not None for v in ys]
        if any(present) and not all(present):
            first = next(group[k][0] for k in range(n) if ys[k] is None)
            raise DataError(f"group {gid!r} has y for some nodes but not all", node_path, first)
        try:
            graph = build_graph(n, edges[gid])
        except GraphError as exc:
            raise DataError(str(exc), edge_path) from exc
        groups.append(GroupData(graph, x, ys if all(present) else None, group_id=gid))
    if not groups:
        raise DataError("no nodes found", node_path)
    return Dataset(tuple(groups))


def write_dataset(dataset, edge_path, node_path):
    """Write the two CSV files read by :func:`load_dataset`."""
    with open(edge_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EDGE_COLUMNS)
        for d in dataset.groups:
            for i, j in d.graph.edges():
                w.writerow((d.group_id, i, j))
    with open(node_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(NODE_COLUMNS)
        for d in dataset.groups:
            for k in range(d.n):
                y = fmt17(d.y[k]) if d.y is not None else ""
                w.writerow((d.group_id, k, fmt17(d.x[k]), y))


_TOP_KEYS = {
    "G", "n_g", "R", "seed", "phi", "level", "model", "u_scale",
    "params", "formation", "estimators", "hausman",
}
_SECTION_KEYS = {
    "params": {"alpha", "delta", "beta", "gamma"},
    "formation": {"kind", "threshold", "pair_shock", "pair_shock_scale", "covariate_weight"},
    "hausman": {"enabled", "method", "coords"},
}
_ESTIMATOR_KEYS = {"name", "mode", "max_step", "include_second_moments"}


def _reject_unknown(table, allowed, where):
    if not isinstance(table, dict):
        raise ConfigError(f"{where} must be a table")
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")


def load_config(path):
    """Read a TOML run configuration into one :class:`McConfig` per ``phi`` panel.

    ``phi`` may be a single name or a list; every other key is shared by all
    panels. Unknown keys are rejected.
    """
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot open: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return configs_from_dict(raw, where=str(path))


def configs_from_dict(raw, where="config"):
    _reject_unknown(raw, _TOP_KEYS, where)
    for section, allowed in _SECTION_KEYS.items():
        if section in raw:
            _reject_unknown(raw[section], allowed, f"{where} [{section}]")
    kw = {k: raw[k] for k in ("G", "n_g", "R", "seed", "level", "model", "u_scale") if k in raw}
    try:
        if "params" in raw:
            kw["params"] = StructuralParams(**{k: float(v) for k, v in raw["params"].items()})
        if "formation" in raw:
            kw["formation"] = FormationConfig(**raw["formation"])
        if "estimators" in raw:
            ests = []
            for k, e in enumerate(raw["estimators"]):
                _reject_unknown(e, _ESTIMATOR_KEYS, f"{where} [[estimators]] #{k + 1}")
                spec = InstrumentSpec(
                    e.get("mode", "E"), e.get("max_step", 4), e.get("include_second_moments", False)
                )
                ests.append((e.get("name", f"TSLS-{spec.mode}"), spec))
            kw["estimators"] = tuple(ests)
        h = raw.get("hausman", {})
        if "enabled" in h:
            kw["hausman"] = bool(h["enabled"])
        if "method" in h:
            kw["hausman_method"] = h["method"]
        if "coords" in h:
            kw["hausman_coords"] = tuple(h["coords"])
        phis = raw.get("phi", ["zero", "linear", "exp3", "sine3"])
        if isinstance(phis, str):
            phis = [phis]
        return [McConfig(phi=phi, **kw) for phi in phis]
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def fit_lines(fit, prefix="fit"):
    """``key=value`` serialization of a :class:`~peerfx.estimator.FitResult`."""
    from .estimator import p_values

    se = fit.se
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, fit.theta / np.where(se > 0, se, 1.0), np.nan)
    p = p_values(t)
    out = [
        f"{prefix}.G={fit.G}",
        f"{prefix}.n={fit.n}",
        f"{prefix}.K={fit.K}",
        f"{prefix}.instruments={','.join(fit.instrument_labels)}",
    ]
    for k, name in enumerate(fit.labels):
        out.append(f"{prefix}.{name}.estimate={fmt17(fit.theta[k])}")
        out.append(f"{prefix}.{name}.se={fmt17(se[k])}")
        out.append(f"{prefix}.{name}.t={fmt17(t[k])}")
        out.append(f"{prefix}.{name}.p={fmt17(p[k])}")
    for a, na in enumerate(fit.labels):
        for b, nb in enumerate(fit.labels):
            out.append(f"{prefix}.cov.{na}.{nb}={fmt17(fit.cov[a, b])}")
    return out
