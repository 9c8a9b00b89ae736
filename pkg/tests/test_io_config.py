"""File formats and configuration validation."""

import json

import numpy as np
import pytest

from nia import (
    HardInstanceSpec,
    InvalidConfig,
    NiaError,
    cyclic_path_assignment,
    generate_hard_instance,
    run_protocol,
)
from nia.config import load_config, parse_config
from nia.io import (
    SCAN_FIELDS,
    TRACE_FIELDS,
    dataset_to_bytes,
    read_dataset_file,
    read_graph_file,
    read_logit_dump,
    sha256_file,
    write_csv,
    write_dataset_file,
    write_graph_file,
    write_logit_dump,
    write_trace_csv,
)


@pytest.fixture()
def small_dataset():
    return generate_hard_instance(HardInstanceSpec(k=3, n=64, seed=1))


class TestDatasetFormat:
    def test_roundtrip(self, small_dataset, tmp_path):
        path = str(tmp_path / "data.nia")
        write_dataset_file(path, small_dataset)
        loaded = read_dataset_file(path)
        assert np.array_equal(loaded.features, small_dataset.features)
        assert np.array_equal(loaded.labels, small_dataset.labels)

    def test_bytes_deterministic(self, small_dataset):
        assert dataset_to_bytes(small_dataset) == dataset_to_bytes(small_dataset)

    def test_header_layout(self, small_dataset):
        raw = dataset_to_bytes(small_dataset)
        assert raw[:4] == b"NIA1"
        n = int.from_bytes(raw[4:12], "little")
        d = int.from_bytes(raw[12:20], "little")
        assert (n, d) == (small_dataset.n, small_dataset.d)
        assert len(raw) == 20 + 8 * n * d + n

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.nia"
        path.write_bytes(b"XXXX" + b"\0" * 32)
        with pytest.raises(NiaError):
            read_dataset_file(str(path))

    def test_truncated_rejected(self, small_dataset, tmp_path):
        path = tmp_path / "cut.nia"
        path.write_bytes(dataset_to_bytes(small_dataset)[:-3])
        with pytest.raises(NiaError):
            read_dataset_file(str(path))

    def test_sha256_matches_content(self, small_dataset, tmp_path):
        import hashlib

        path = str(tmp_path / "data.nia")
        write_dataset_file(path, small_dataset)
        assert sha256_file(path) == hashlib.sha256(dataset_to_bytes(small_dataset)).hexdigest()


class TestGraphFormat:
    def test_roundtrip(self, tmp_path):
        g = cyclic_path_assignment(3, 5)
        path = str(tmp_path / "graph.json")
        write_graph_file(path, g, d=3)
        loaded, d = read_graph_file(path)
        assert d == 3
        assert loaded.topo_order == g.topo_order
        assert loaded.feature_sets == g.feature_sets
        assert loaded.parents == g.parents

    def test_indices_are_one_based_on_disk(self, tmp_path):
        g = cyclic_path_assignment(2, 2)
        path = tmp_path / "graph.json"
        write_graph_file(str(path), g, d=2)
        obj = json.loads(path.read_text())
        assert obj["agents"][0] == {"id": 1, "features": [1], "parents": []}
        assert obj["agents"][1] == {"id": 2, "features": [2], "parents": [1]}

    def test_malformed_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"agents": []}))
        with pytest.raises(NiaError):
            read_graph_file(str(path))

    def test_non_consecutive_ids_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(
            json.dumps({"d": 1, "agents": [{"id": 2, "features": [1], "parents": []}]})
        )
        with pytest.raises(NiaError):
            read_graph_file(str(path))


class TestTraceAndScanCsv:
    def test_trace_columns_and_rows(self, small_dataset, tmp_path):
        trace = run_protocol(small_dataset, cyclic_path_assignment(3, 4))
        path = tmp_path / "trace.csv"
        write_trace_csv(str(path), trace)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == ",".join(TRACE_FIELDS)
        assert len(lines) == 5
        first = lines[1].split(",")
        assert first[0] == "1" and first[1] == "1"

    def test_float_fields_roundtrip(self, tmp_path):
        rows = [{k: None for k in SCAN_FIELDS}]
        rows[0].update(config_hash="abc", k=2, D=4, M=2, p=2, seed=1, n=10,
                       sink_loss=0.1234567890123456789, global_loss=0.1,
                       excess=2.34e-17, upper_bound=1.0, lower_shape=1 / 3)
        path = tmp_path / "scan.csv"
        write_csv(str(path), rows, SCAN_FIELDS)
        header, row = path.read_text().strip().splitlines()
        values = dict(zip(header.split(","), row.split(",")))
        assert float(values["sink_loss"]) == 0.1234567890123456789
        assert float(values["excess"]) == 2.34e-17
        assert values["error"] == ""

    def test_logit_dump_layout(self, small_dataset, tmp_path):
        trace = run_protocol(small_dataset, cyclic_path_assignment(3, 4))
        path = str(tmp_path / "logits.bin")
        write_logit_dump(path, trace)
        raw = open(path, "rb").read()
        n = int.from_bytes(raw[:8], "little")
        depth = int.from_bytes(raw[8:16], "little")
        assert (n, depth) == (small_dataset.n, 4)
        matrix = read_logit_dump(path)
        assert np.array_equal(matrix, trace.logit_matrix())


class TestConfig:
    def test_defaults(self):
        cfg = parse_config({})
        assert cfg.instance.kind == "hard"
        assert cfg.solver.grad_tol == 1e-10
        assert cfg.threads == 1

    def test_unknown_top_level_key_rejected(self):
        with pytest.raises(InvalidConfig):
            parse_config({"instancee": {}})

    def test_unknown_nested_key_rejected(self):
        with pytest.raises(InvalidConfig):
            parse_config({"solver": {"gradtol": 1e-6}})

    def test_k_below_two_rejected(self):
        with pytest.raises(InvalidConfig):
            parse_config({"instance": {"kind": "hard", "k": 1}})

    def test_duplicate_seeds_rejected(self):
        with pytest.raises(InvalidConfig):
            parse_config({"instance": {"seeds": [1, 1]}})

    def test_empty_scan_grids_rejected(self):
        with pytest.raises(InvalidConfig):
            parse_config({"scan": {}})
        with pytest.raises(InvalidConfig):
            parse_config({"scan": {"depths": []}})

    def test_graph_needs_exactly_one_source(self):
        with pytest.raises(InvalidConfig):
            parse_config({"graph": {}})
        with pytest.raises(InvalidConfig):
            parse_config({"graph": {"cyclic_depth": 4, "file": "g.json"}})

    def test_missing_graph_file_rejected(self, tmp_path):
        with pytest.raises(InvalidConfig):
            parse_config({"graph": {"file": str(tmp_path / "absent.json")}})

    def test_relative_paths_resolve_against_config_dir(self, tmp_path):
        g = cyclic_path_assignment(2, 2)
        write_graph_file(str(tmp_path / "g.json"), g, d=2)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"graph": {"file": "g.json"}}))
        cfg = load_config(str(cfg_path))
        assert cfg.graph.file == str(tmp_path / "g.json")
        assert cfg.out_dir == str(tmp_path / "out")

    def test_config_hash_stable_under_key_order(self):
        a = parse_config({"instance": {"k": 4, "n": 10}, "threads": 2})
        b = parse_config({"threads": 2, "instance": {"n": 10, "k": 4}})
        assert a.config_hash() == b.config_hash()

    def test_config_hash_changes_with_content(self):
        a = parse_config({"instance": {"k": 4}})
        b = parse_config({"instance": {"k": 5}})
        assert a.config_hash() != b.config_hash()

    def test_malformed_json_reported(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{not json")
        with pytest.raises(InvalidConfig):
            load_config(str(path))

    def test_negative_seed_rejected(self):
        with pytest.raises(InvalidConfig):
            parse_config({"instance": {"seeds": [-1]}})
