"""File formats: dataset binary, graph JSON, trace/scan CSV, logit dumps.

Dataset binary layout: magic "NIA1", u64 n, u64 d (little endian), n*d
row-major float64 feature values, then n label bytes (0/1). All files are
written atomically (temp file + rename).
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import struct
import tempfile
from typing import Iterable

import numpy as np

from .data import Dataset
from .errors import NiaError
from .graph import AgentGraph, build_agent_graph
from .protocol import ProtocolTrace

DATASET_MAGIC = b"NIA1"

TRACE_FIELDS = ("agent_id", "topo_pos", "loss", "grad_norm", "converged", "l1_weight_norm")

SCAN_FIELDS = (
    "config_hash",
    "k",
    "D",
    "M",
    "p",
    "seed",
    "n",
    "sink_loss",
    "global_loss",
    "excess",
    "upper_bound",
    "lower_shape",
    "error",
)


def _fmt(x) -> str:
    """Round-trippable text for floats; plain str otherwise."""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def atomic_write_bytes(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: str, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def dataset_to_bytes(dataset: Dataset) -> bytes:
    header = DATASET_MAGIC + struct.pack("<QQ", dataset.n, dataset.d)
    feats = np.ascontiguousarray(dataset.features, dtype="<f8").tobytes()
    labels = dataset.labels.astype(np.uint8).tobytes()
    return header + feats + labels


def write_dataset_file(path: str, dataset: Dataset) -> None:
    atomic_write_bytes(path, dataset_to_bytes(dataset))


def read_dataset_file(path: str) -> Dataset:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != DATASET_MAGIC:
        raise NiaError(f"{path}: bad magic, not a dataset file")
    n, d = struct.unpack_from("<QQ", raw, 4)
    offset = 4 + 16
    expected = offset + 8 * n * d + n
    if len(raw) != expected:
        raise NiaError(f"{path}: truncated dataset file ({len(raw)} bytes, expected {expected})")
    feats = np.frombuffer(raw, dtype="<f8", count=n * d, offset=offset).reshape(n, d)
    labels = np.frombuffer(raw, dtype=np.uint8, count=n, offset=offset + 8 * n * d)
    return Dataset(features=feats.astype(np.float64), labels=labels.astype(np.float64))


def graph_to_json_obj(graph: AgentGraph, d: int) -> dict:
    return {
        "d": d,
        "agents": [
            {
                "id": a,
                "features": sorted(graph.feature_set(a)),
                "parents": list(graph.parents_of(a)),
            }
            for a in range(1, graph.num_agents + 1)
        ],
    }


def graph_from_json_obj(obj: dict) -> tuple[AgentGraph, int]:
    try:
        d = int(obj["d"])
        agents = obj["agents"]
        by_id = {int(a["id"]): a for a in agents}
        n = len(agents)
        if sorted(by_id) != list(range(1, n + 1)):
            raise NiaError("graph file must use consecutive agent ids 1..N")
        feature_sets = [by_id[i]["features"] for i in range(1, n + 1)]
        edges = [(int(p), i) for i in range(1, n + 1) for p in by_id[i]["parents"]]
    except (KeyError, TypeError) as exc:
        raise NiaError(f"malformed graph description: {exc}") from exc
    return build_agent_graph(edges, feature_sets, d), d


def write_graph_file(path: str, graph: AgentGraph, d: int) -> None:
    write_json(path, graph_to_json_obj(graph, d))


def read_graph_file(path: str) -> tuple[AgentGraph, int]:
    with open(path, "r", encoding="utf-8") as fh:
        return graph_from_json_obj(json.load(fh))


def trace_csv_rows(trace: ProtocolTrace) -> list[dict]:
    rows = []
    for pos, agent_id in enumerate(trace.order, start=1):
        model = trace.models[agent_id]
        rows.append(
            {
                "agent_id": agent_id,
                "topo_pos": pos,
                "loss": model.loss,
                "grad_norm": model.grad_norm,
                "converged": model.converged,
                "l1_weight_norm": model.l1_norm,
            }
        )
    return rows


def write_csv(path: str, rows: Iterable[dict], fields: tuple[str, ...]) -> None:
    import io as _io

    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row[k]) if row[k] is not None else "" for k in fields})
    atomic_write_text(path, buf.getvalue())


def write_trace_csv(path: str, trace: ProtocolTrace) -> None:
    write_csv(path, trace_csv_rows(trace), TRACE_FIELDS)


def write_logit_dump(path: str, trace: ProtocolTrace) -> None:
    """Flat binary dump of all logit columns: u64 n, u64 D, then the n x D
    column-per-agent matrix row-major as little-endian float64."""
    matrix = np.ascontiguousarray(trace.logit_matrix(), dtype="<f8")
    n, depth = matrix.shape
    atomic_write_bytes(path, struct.pack("<QQ", n, depth) + matrix.tobytes())


def read_logit_dump(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    n, depth = struct.unpack_from("<QQ", raw, 0)
    return np.frombuffer(raw, dtype="<f8", count=n * depth, offset=16).reshape(n, depth)
