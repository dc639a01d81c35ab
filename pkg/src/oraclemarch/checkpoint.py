"""Checkpoint persistence: magic bytes, version, JSON header, raw blocks.

File layout (little-endian): 4 magic bytes "ORMC", u32 format version, u64
header length, UTF-8 JSON header (sorted keys), then the raw parameter
blocks exactly in the order declared by header["params"]. Round trips are
byte-exact.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import CorruptFile, IncompatibleCheckpoint, VersionMismatch
from .geom import ViewCell
from .net import MLPConfig, MLPParams
from .oracle_targets import DepthBins
from .render import Pipeline, PipelineConfig
from .sampling import DepthRange, EncodingConfig

MAGIC = b"ORMC"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    cell: ViewCell
    depth_range: DepthRange
    encoding: EncodingConfig
    pipeline: PipelineConfig
    oracle_cfg: MLPConfig | None = None
    oracle_params: MLPParams | None = None
    oracle_kind: str = "classified"
    oracle_unified: bool = True
    shading_cfg: MLPConfig | None = None
    shading_params: MLPParams | None = None
    fov_deg: float = 55.0
    phase: str = "oracle"
    iteration: int = 0
    validation_loss: float = float("nan")

    @property
    def bins(self) -> DepthBins:
        return DepthBins(self.pipeline.bins, self.depth_range)

    def build_pipeline(self) -> Pipeline:
        return Pipeline(
            cell=self.cell,
            depth_range=self.depth_range,
            bins=self.bins,
            encoding=self.encoding,
            config=self.pipeline,
            oracle_cfg=self.oracle_cfg,
            oracle_params=self.oracle_params,
            oracle_kind=self.oracle_kind,
            oracle_unified=self.oracle_unified,
            shading_cfg=self.shading_cfg,
            shading_params=self.shading_params,
        )

    def validate(self) -> None:
        """Cross-checks between declared configs and parameter shapes."""
        for name, cfg, params in (
            ("oracle", self.oracle_cfg, self.oracle_params),
            ("shading", self.shading_cfg, self.shading_params),
        ):
            if (cfg is None) != (params is None):
                raise IncompatibleCheckpoint(f"{name} config and parameters must come together")
            if cfg is None:
                continue
            for layer in range(cfg.n_layers):
                if params.weights[layer].shape != (cfg.fan_in(layer), cfg.fan_out(layer)):
                    raise IncompatibleCheckpoint(f"{name} layer {layer} weight shape mismatch")
                if params.biases[layer].shape != (cfg.fan_out(layer),):
                    raise IncompatibleCheckpoint(f"{name} layer {layer} bias shape mismatch")
        if self.oracle_cfg is not None and self.oracle_kind == "classified":
            pipe = self.build_pipeline()
            if self.oracle_cfg.in_dim != pipe.oracle_input_dim():
                raise IncompatibleCheckpoint("oracle input width does not match bins/inputs")
            if self.oracle_cfg.out_dim != self.pipeline.bins:
                raise IncompatibleCheckpoint("oracle output width does not match bin count")


def _param_blocks(prefix: str, cfg: MLPConfig | None, params: MLPParams | None):
    if cfg is None:
        return []
    blocks = []
    for layer in range(cfg.n_layers):
        blocks.append((f"{prefix}.w{layer}", params.weights[layer]))
        blocks.append((f"{prefix}.b{layer}", params.biases[layer]))
    return blocks


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    ckpt.validate()
    blocks = _param_blocks("oracle", ckpt.oracle_cfg, ckpt.oracle_params) + _param_blocks(
        "shading", ckpt.shading_cfg, ckpt.shading_params
    )
    header = {
        "format_version": FORMAT_VERSION,
        "view_cell": ckpt.cell.to_dict(),
        "depth_range": ckpt.depth_range.to_dict(),
        "encoding": ckpt.encoding.to_dict(),
        "pipeline": ckpt.pipeline.to_dict(),
        "fov_deg": ckpt.fov_deg,
        "oracle": None
        if ckpt.oracle_cfg is None
        else {
            "config": ckpt.oracle_cfg.to_dict(),
            "kind": ckpt.oracle_kind,
            "unified": ckpt.oracle_unified,
        },
        "shading": None if ckpt.shading_cfg is None else {"config": ckpt.shading_cfg.to_dict()},
        "training": {
            "phase": ckpt.phase,
            "iteration": ckpt.iteration,
            "validation_loss": ckpt.validation_loss,
        },
        "params": [
            {"name": name, "shape": list(arr.shape), "dtype": arr.dtype.str}
            for name, arr in blocks
        ],
    }
    payload = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<Q", len(payload)))
        f.write(payload)
        for _, arr in blocks:
            f.write(np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise CorruptFile(f"{path} is not a checkpoint file")
    (version,) = struct.unpack("<I", raw[4:8])
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"checkpoint format {version}, expected {FORMAT_VERSION}")
    (header_len,) = struct.unpack("<Q", raw[8:16])
    if len(raw) < 16 + header_len:
        raise CorruptFile(f"{path}: truncated header")
    try:
        header = json.loads(raw[16 : 16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptFile(f"{path}: malformed header ({e})") from None

    offset = 16 + header_len
    arrays = {}
    for spec in header["params"]:
        dtype = np.dtype(spec["dtype"])
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        nbytes = count * dtype.itemsize
        if offset + nbytes > len(raw):
            raise CorruptFile(f"{path}: truncated parameter block {spec['name']}")
        arrays[spec["name"]] = (
            np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
            .reshape(spec["shape"])
            .copy()
        )
        offset += nbytes
    if offset != len(raw):
        raise CorruptFile(f"{path}: {len(raw) - offset} trailing bytes")

    def gather(prefix: str, cfg: MLPConfig | None):
        if cfg is None:
            return None
        weights = [arrays[f"{prefix}.w{layer}"] for layer in range(cfg.n_layers)]
        biases = [arrays[f"{prefix}.b{layer}"] for layer in range(cfg.n_layers)]
        return MLPParams(weights, biases)

    oracle = header["oracle"]
    shading = header["shading"]
    oracle_cfg = None if oracle is None else MLPConfig.from_dict(oracle["config"])
    shading_cfg = None if shading is None else MLPConfig.from_dict(shading["config"])
    ckpt = Checkpoint(
        cell=ViewCell.from_dict(header["view_cell"]),
        depth_range=DepthRange.from_dict(header["depth_range"]),
        encoding=EncodingConfig.from_dict(header["encoding"]),
        pipeline=PipelineConfig.from_dict(header["pipeline"]),
        oracle_cfg=oracle_cfg,
        oracle_params=gather("oracle", oracle_cfg),
        oracle_kind="classified" if oracle is None else str(oracle["kind"]),
        oracle_unified=True if oracle is None else bool(oracle["unified"]),
        shading_cfg=shading_cfg,
        shading_params=gather("shading", shading_cfg),
        fov_deg=float(header["fov_deg"]),
        phase=str(header["training"]["phase"]),
        iteration=int(header["training"]["iteration"]),
        validation_loss=float(header["training"]["validation_loss"]),
    )
    ckpt.validate()
    return ckpt


def with_pipeline(ckpt: Checkpoint, pipeline: PipelineConfig) -> Checkpoint:
    return replace(ckpt, pipeline=pipeline)
