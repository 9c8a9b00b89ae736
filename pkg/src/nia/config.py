"""Experiment configuration: strict JSON parsing with typo-safe key checks."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

from .errors import InvalidConfig
from .logistic import FitOptions


def _require_keys(section: str, obj: dict, allowed: set[str]) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise InvalidConfig(f"unknown key(s) in {section}: {sorted(unknown)}")


@dataclass(frozen=True)
class InstanceConfig:
    kind: str = "hard"
    k: int = 4
    n: int = 100_000
    seeds: tuple[int, ...] = (1,)
    dataset: str | None = None

    @staticmethod
    def from_dict(obj: dict, base_dir: str) -> "InstanceConfig":
        _require_keys("instance", obj, {"kind", "k", "n", "seeds", "dataset"})
        kind = obj.get("kind", "hard")
        if kind not in ("hard", "file"):
            raise InvalidConfig(f"instance.kind must be 'hard' or 'file', got {kind!r}")
        seeds = tuple(int(s) for s in obj.get("seeds", [1]))
        if not seeds:
            raise InvalidConfig("instance.seeds must be non-empty")
        if len(set(seeds)) != len(seeds):
            raise InvalidConfig("instance.seeds must be distinct")
        if any(s < 0 for s in seeds):
            raise InvalidConfig("instance.seeds must be non-negative")
        cfg = InstanceConfig(
            kind=kind,
            k=int(obj.get("k", 4)),
            n=int(obj.get("n", 100_000)),
            seeds=seeds,
            dataset=_resolve(obj.get("dataset"), base_dir),
        )
        if kind == "hard":
            if cfg.k < 2:
                raise InvalidConfig(f"instance.k must be >= 2, got {cfg.k}")
            if cfg.n < 1:
                raise InvalidConfig(f"instance.n must be >= 1, got {cfg.n}")
        if kind == "file":
            if cfg.dataset is None:
                raise InvalidConfig("instance.kind='file' requires instance.dataset")
            if not os.path.exists(cfg.dataset):
                raise InvalidConfig(f"dataset file not found: {cfg.dataset}")
        return cfg


@dataclass(frozen=True)
class GraphConfig:
    cyclic_depth: int | None = None
    file: str | None = None
    m: int | None = None

    @staticmethod
    def from_dict(obj: dict, base_dir: str) -> "GraphConfig":
        _require_keys("graph", obj, {"cyclic_depth", "file", "m"})
        cfg = GraphConfig(
            cyclic_depth=(int(obj["cyclic_depth"]) if "cyclic_depth" in obj else None),
            file=_resolve(obj.get("file"), base_dir),
            m=(int(obj["m"]) if "m" in obj else None),
        )
        if (cfg.cyclic_depth is None) == (cfg.file is None):
            raise InvalidConfig("graph needs exactly one of 'cyclic_depth' or 'file'")
        if cfg.cyclic_depth is not None and cfg.cyclic_depth < 1:
            raise InvalidConfig("graph.cyclic_depth must be >= 1")
        if cfg.file is not None and not os.path.exists(cfg.file):
            raise InvalidConfig(f"graph file not found: {cfg.file}")
        return cfg


@dataclass(frozen=True)
class SolverConfig:
    grad_tol: float = 1e-10
    max_iters: int = 100
    ridge: float = 0.0
    backtrack: float = 0.5
    init_step: float = 1.0

    @staticmethod
    def from_dict(obj: dict) -> "SolverConfig":
        _require_keys(
            "solver", obj, {"grad_tol", "max_iters", "ridge", "backtrack", "init_step"}
        )
        try:
            cfg = SolverConfig(
                grad_tol=float(obj.get("grad_tol", 1e-10)),
                max_iters=int(obj.get("max_iters", 100)),
                ridge=float(obj.get("ridge", 0.0)),
                backtrack=float(obj.get("backtrack", 0.5)),
                init_step=float(obj.get("init_step", 1.0)),
            )
            cfg.to_fit_options()
        except ValueError as exc:
            raise InvalidConfig(f"invalid solver options: {exc}") from exc
        return cfg

    def to_fit_options(self) -> FitOptions:
        return FitOptions(
            grad_tol=self.grad_tol,
            max_iters=self.max_iters,
            ridge=self.ridge,
            backtrack=self.backtrack,
            init_step=self.init_step,
        )


@dataclass(frozen=True)
class ScanConfig:
    depths: tuple[int, ...] = ()
    passes: tuple[int, ...] = ()
    windows: tuple[int, ...] = ()

    @staticmethod
    def from_dict(obj: dict) -> "ScanConfig":
        _require_keys("scan", obj, {"depths", "passes", "windows"})
        cfg = ScanConfig(
            depths=tuple(int(x) for x in obj.get("depths", [])),
            passes=tuple(int(x) for x in obj.get("passes", [])),
            windows=tuple(int(x) for x in obj.get("windows", [])),
        )
        if not cfg.depths and not cfg.passes:
            raise InvalidConfig("scan needs a non-empty 'depths' or 'passes' grid")
        if any(x < 1 for x in cfg.depths + cfg.passes + cfg.windows):
            raise InvalidConfig("scan grid values must be >= 1")
        return cfg


@dataclass(frozen=True)
class VerifyConfig:
    """Sizes for the identity-verification suites; defaults match the
    acceptance settings."""

    seed: int = 1
    k: int = 4
    depth: int = 16
    n_protocol: int = 100_000
    n_decomposition: int = 100_000
    decomposition_grad_tol: float = 1e-12
    decomposition_perturbations: int = 20
    pinsker_trials: int = 10_000
    noise_samples: int = 1_000_000
    noise_scale: float = 0.8

    @staticmethod
    def from_dict(obj: dict) -> "VerifyConfig":
        allowed = {
            "seed",
            "k",
            "depth",
            "n_protocol",
            "n_decomposition",
            "decomposition_grad_tol",
            "decomposition_perturbations",
            "pinsker_trials",
            "noise_samples",
            "noise_scale",
        }
        _require_keys("verify", obj, allowed)
        defaults = VerifyConfig()
        return VerifyConfig(
            seed=int(obj.get("seed", defaults.seed)),
            k=int(obj.get("k", defaults.k)),
            depth=int(obj.get("depth", defaults.depth)),
            n_protocol=int(obj.get("n_protocol", defaults.n_protocol)),
            n_decomposition=int(obj.get("n_decomposition", defaults.n_decomposition)),
            decomposition_grad_tol=float(
                obj.get("decomposition_grad_tol", defaults.decomposition_grad_tol)
            ),
            decomposition_perturbations=int(
                obj.get("decomposition_perturbations", defaults.decomposition_perturbations)
            ),
            pinsker_trials=int(obj.get("pinsker_trials", defaults.pinsker_trials)),
            noise_samples=int(obj.get("noise_samples", defaults.noise_samples)),
            noise_scale=float(obj.get("noise_scale", defaults.noise_scale)),
        )


@dataclass(frozen=True)
class ExperimentConfig:
    instance: InstanceConfig = field(default_factory=InstanceConfig)
    graph: GraphConfig | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    scan: ScanConfig | None = None
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    out_dir: str = "out"
    threads: int = 1
    dump_logits: bool = False

    def config_hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def _resolve(path: str | None, base_dir: str) -> str | None:
    if path is None:
        return None
    if os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base_dir, path))


def parse_config(obj: dict, base_dir: str = ".") -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise InvalidConfig("configuration root must be a JSON object")
    allowed = {"instance", "graph", "solver", "scan", "verify", "out_dir", "threads", "dump_logits"}
    _require_keys("config", obj, allowed)
    threads = int(obj.get("threads", 1))
    if threads < 1:
        raise InvalidConfig("threads must be >= 1")
    return ExperimentConfig(
        instance=InstanceConfig.from_dict(obj.get("instance", {}), base_dir),
        graph=(GraphConfig.from_dict(obj["graph"], base_dir) if "graph" in obj else None),
        solver=SolverConfig.from_dict(obj.get("solver", {})),
        scan=(ScanConfig.from_dict(obj["scan"]) if "scan" in obj else None),
        verify=VerifyConfig.from_dict(obj.get("verify", {})),
        out_dir=_resolve(obj.get("out_dir", "out"), base_dir),
        threads=threads,
        dump_logits=bool(obj.get("dump_logits", False)),
    )


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: {exc}") from exc
    return parse_config(obj, base_dir=os.path.dirname(os.path.abspath(path)))
