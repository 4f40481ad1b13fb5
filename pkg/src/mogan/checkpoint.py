"""Self-describing text checkpoints for trained detector/generator pairs.

The format is a single JSON document: topology (layer kinds plus constructor
arguments), parameter tensors as nested decimal-float lists, latent
statistics, thresholds, a config echo, and an optional standardizer. Decimal
serialization uses Python's shortest round-trip float repr, so loading a
checkpoint reproduces every 64-bit parameter bit-exactly and classification
and fault-score outputs match the saved model exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .dataio import Standardizer
from .model import (DiscriminatorNet, FaultDetector, GeneratorNet, LatentStats,
                    TrainConfig)
from .ndcore import LAYER_KINDS, Network

FORMAT_NAME = "fault-gan-checkpoint"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class CheckpointBundle:
    """Everything a load gives back."""

    detector: FaultDetector
    generator: GeneratorNet
    config: dict
    class_names: list
    delta: list
    standardizer: Standardizer | None


def _net_to_doc(net: Network) -> list:
    doc = []
    for layer in net.layers:
        doc.append({
            "kind": layer.kind,
            "config": layer.config(),
            "params": [p.tolist() for p in layer.params],
        })
    return doc


def _net_from_doc(doc) -> Network:
    layers = []
    for i, entry in enumerate(doc):
        kind = entry.get("kind")
        if kind not in LAYER_KINDS:
            raise CheckpointError(f"layer {i}: unknown kind {kind!r}")
        try:
            layer = LAYER_KINDS[kind](**entry.get("config", {}))
        except TypeError as e:
            raise CheckpointError(f"layer {i} ({kind}): bad config: {e}") from None
        stored = entry.get("params", [])
        if len(stored) != len(layer.params):
            raise CheckpointError(f"layer {i} ({kind}): expected "
                                  f"{len(layer.params)} parameter arrays")
        for j, p in enumerate(stored):
            arr = np.asarray(p, dtype=np.float64)
            if arr.shape != layer.params[j].shape:
                raise CheckpointError(f"layer {i} ({kind}) param {j}: shape "
                                      f"{arr.shape} != {layer.params[j].shape}")
            layer.params[j] = arr
        layers.append(layer)
    return Network(layers)


def save_checkpoint(path, det: FaultDetector, gen: GeneratorNet,
                    cfg: TrainConfig | dict, class_names,
                    delta=None, standardizer: Standardizer | None = None) -> None:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "width": det.disc.width,
        "n_classes": det.disc.n_classes,
        "class_names": list(class_names),
        "tau": float(det.tau),
        "target_fpr": float(det.target_fpr),
        "delta": [float(d) for d in (delta if delta is not None else [])],
        "config": asdict(cfg) if isinstance(cfg, TrainConfig) else dict(cfg),
        "discriminator": {
            "embed_layer": det.disc.embed_layer,
            "embed_dim": det.disc.embed_dim,
            "layers": _net_to_doc(det.disc.net),
        },
        "generator": {
            "latent_dim": gen.latent_dim,
            "body": gen.body,
            "layers": _net_to_doc(gen.net),
            "stats": {"mu": gen.stats.mu.tolist(), "var": gen.stats.var.tolist()},
            "projection": None if gen.projection is None else gen.projection.tolist(),
        },
        "standardizer": None if standardizer is None else {
            "mean": standardizer.mean.tolist(),
            "scale": standardizer.scale.tolist(),
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, allow_nan=False, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> CheckpointBundle:
    with open(path, "r") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise CheckpointError(f"{path}: not valid JSON: {e}") from None
    if doc.get("format") != FORMAT_NAME:
        raise CheckpointError(f"{path}: not a {FORMAT_NAME} document")
    if doc.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {doc.get('version')!r}")
    for key in ("width", "n_classes", "discriminator", "generator", "tau"):
        if key not in doc:
            raise CheckpointError(f"{path}: missing field {key!r}")
    width = int(doc["width"])
    k = int(doc["n_classes"])
    ddoc = doc["discriminator"]
    disc = DiscriminatorNet.from_parts(
        _net_from_doc(ddoc["layers"]), width, k,
        int(ddoc["embed_layer"]), int(ddoc["embed_dim"]))
    gdoc = doc["generator"]
    stats = LatentStats(np.asarray(gdoc["stats"]["mu"], dtype=np.float64),
                        np.asarray(gdoc["stats"]["var"], dtype=np.float64))
    projection = gdoc.get("projection")
    gen = GeneratorNet.from_parts(
        _net_from_doc(gdoc["layers"]), width, k, int(gdoc["latent_dim"]),
        gdoc.get("body", "mlp"), stats,
        None if projection is None else np.asarray(projection, dtype=np.float64))
    det = FaultDetector(disc, tau=float(doc["tau"]),
                        target_fpr=float(doc.get("target_fpr", 0.05)))
    sdoc = doc.get("standardizer")
    std = None
    if sdoc is not None:
        std = Standardizer(mean=np.asarray(sdoc["mean"], dtype=np.float64),
                           scale=np.asarray(sdoc["scale"], dtype=np.float64))
    return CheckpointBundle(
        detector=det,
        generator=gen,
        config=dict(doc.get("config", {})),
        class_names=list(doc.get("class_names", [])),
        delta=[float(d) for d in doc.get("delta", [])],
        standardizer=std,
    )
