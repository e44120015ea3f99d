"""Binary checkpoint format for fitted classifiers.

Layout (all integers little-endian):

    bytes 0:8    magic "SNGPCKPT"
    bytes 8:12   format version (u32, currently 1)
    bytes 12:16  manifest length in bytes (u32)
    ...          manifest: UTF-8 JSON (sorted keys, compact separators)
    ...          payload: concatenated float64 tensors, little-endian

The manifest lists every tensor (name, shape, element count, byte
offset relative to the payload start) plus scalar hyperparameters and
bookkeeping (method tag, classes, converged spectral norms, whether the
GP posterior is finalized).  Offsets must be in-bounds, non-overlapping
and contiguous; loading validates all of that and reproduces arrays
bit-for-bit, so save -> load -> save yields identical bytes.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .data import Standardizer
from .estimators import DeterministicClassifier, MCDropoutClassifier, SNGPClassifier
from .exceptions import CheckpointError
from .gp import LaplacePosterior, RFFProjection
from .network import DenseHeadModel, DenseLayer, Encoder, GPHeadModel
from .validation import check_fitted

MAGIC = b"SNGPCKPT"
FORMAT_VERSION = 1

_METHOD_CLASSES = {
    "baseline": DeterministicClassifier,
    "mc_dropout": MCDropoutClassifier,
    "sngp": SNGPClassifier,
}


def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    raise ValueError(f"cannot serialize parameter value {value!r}")


def _collect_tensors(clf) -> dict[str, np.ndarray]:
    tensors = dict(clf.model_.params())
    if clf.model_.head_kind == "gp":
        tensors["gp.w_r"] = clf.model_.rff.w
        tensors["gp.b_r"] = clf.model_.rff.b
        post = clf.model_.posterior
        tensors["gp.precision"] = post.precision
        tensors["gp.covariance"] = post.covariance
    else:
        # params() already holds head.W / head.b for the dense model
        pass
    if clf.feature_stats_ is not None:
        tensors["stats.mean"] = clf.feature_stats_.mean_
        tensors["stats.std"] = clf.feature_stats_.std_
    return tensors


def save_checkpoint(path, clf) -> None:
    """Serialize a fitted classifier (sngp models must be finalized)."""
    check_fitted(clf, "model_")
    method_tag = clf.method_tag
    if method_tag not in _METHOD_CLASSES:
        raise ValueError(f"unknown method tag {method_tag!r}")
    finalized = None
    if clf.model_.head_kind == "gp":
        post = clf.model_.posterior
        if post is None or not post.finalized:
            raise ValueError("refusing to checkpoint a GP model without a finalized posterior")
        finalized = True
    tensors = _collect_tensors(clf)
    entries = []
    offset = 0
    blobs = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f8")
        entries.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "offset": offset,
                "count": int(arr.size),
            }
        )
        blobs.append(arr.tobytes())
        offset += arr.size * 8
    scalars = {
        "method_tag": method_tag,
        "params": _jsonable(clf.get_params()),
        "classes": [int(c) for c in clf.classes_],
        "n_features": int(clf.n_features_in_),
        "head_kind": clf.model_.head_kind,
        "dropout_rate": float(clf.model_.encoder.dropout_rate),
        "finalized": finalized,
        "converged_sigmas": _jsonable(getattr(clf, "converged_sigmas_", None)),
        "has_feature_stats": clf.feature_stats_ is not None,
    }
    if clf.model_.head_kind == "gp":
        scalars["rff_lengthscale"] = float(clf.model_.rff.lengthscale)
        scalars["prior_precision"] = float(clf.model_.posterior.prior_precision)
    manifest = json.dumps(
        {"scalars": scalars, "tensors": entries}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(manifest)))
        fh.write(manifest)
        for blob in blobs:
            fh.write(blob)


def _read_manifest(data: bytes):
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if len(data) < 16:
        raise CheckpointError("truncated checkpoint (header incomplete)")
    (version,) = struct.unpack_from("<I", data, 8)
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format version {version} (supported: {FORMAT_VERSION})"
        )
    (mlen,) = struct.unpack_from("<I", data, 12)
    if 16 + mlen > len(data):
        raise CheckpointError("truncated checkpoint (manifest extends past end of file)")
    try:
        manifest = json.loads(data[16 : 16 + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CheckpointError(f"checkpoint manifest is not valid JSON ({err})")
    return manifest, data[16 + mlen :]


def _read_tensors(manifest, payload: bytes) -> dict[str, np.ndarray]:
    entries = manifest.get("tensors")
    if not isinstance(entries, list):
        raise CheckpointError("checkpoint manifest has no tensor table")
    spans = []
    tensors = {}
    for e in entries:
        name, shape, offset, count = e["name"], e["shape"], e["offset"], e["count"]
        if count != int(np.prod(shape, dtype=np.int64)):
            raise CheckpointError(f"tensor {name!r}: count does not match shape")
        nbytes = count * 8
        if offset < 0 or offset + nbytes > len(payload):
            raise CheckpointError(
                f"truncated checkpoint payload (tensor {name!r} extends past end of file)"
            )
        spans.append((offset, offset + nbytes, name))
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        tensors[name] = arr.reshape(shape).astype(np.float64, copy=True)
    spans.sort()
    for (s0, e0, n0), (s1, e1, n1) in zip(spans, spans[1:]):
        if s1 < e0:
            raise CheckpointError(f"overlapping tensors {n0!r} and {n1!r} in checkpoint")
    total = sum(e - s for s, e, _ in spans)
    if total != len(payload):
        raise CheckpointError(
            f"checkpoint payload size mismatch (manifest says {total} bytes, found {len(payload)})"
        )
    return tensors


def _rebuild_encoder(tensors, dropout_rate: float) -> Encoder:
    in_proj = DenseLayer(tensors["encoder.in_proj.W"], tensors["encoder.in_proj.b"])
    blocks = []
    i = 0
    while f"encoder.block{i}.W" in tensors:
        blocks.append(
            DenseLayer(tensors[f"encoder.block{i}.W"], tensors[f"encoder.block{i}.b"])
        )
        i += 1
    return Encoder(in_proj, blocks, dropout_rate)


def load_checkpoint(path):
    """Rebuild the fitted classifier stored at ``path``."""
    with open(path, "rb") as fh:
        data = fh.read()
    manifest, payload = _read_manifest(data)
    tensors = _read_tensors(manifest, payload)
    scalars = manifest.get("scalars", {})
    method_tag = scalars.get("method_tag")
    if method_tag not in _METHOD_CLASSES:
        raise CheckpointError(f"checkpoint has unknown method tag {method_tag!r}")
    params = scalars.get("params", {})
    # JSON turns tuples into lists; restore tuple-typed hyperparameters so
    # get_params() round-trips exactly.
    defaults = _METHOD_CLASSES[method_tag]().get_params()
    params = {
        k: tuple(v) if isinstance(v, list) and isinstance(defaults.get(k), tuple) else v
        for k, v in params.items()
    }
    clf = _METHOD_CLASSES[method_tag](**params)
    encoder = _rebuild_encoder(tensors, float(scalars.get("dropout_rate", 0.0)))
    if scalars.get("head_kind") == "gp":
        rff = RFFProjection(
            tensors["gp.w_r"], tensors["gp.b_r"], float(scalars["rff_lengthscale"])
        )
        model = GPHeadModel(encoder, rff, tensors["gp.beta"])
        post = LaplacePosterior(rff.dim, float(scalars["prior_precision"]))
        post.precision = tensors["gp.precision"]
        post.covariance = tensors["gp.covariance"]
        post.finalized = bool(scalars.get("finalized"))
        model.posterior = post
        clf.posterior_ = post
    else:
        model = DenseHeadModel(encoder, DenseLayer(tensors["head.W"], tensors["head.b"]))
    clf.model_ = model
    clf.classes_ = np.asarray(scalars["classes"], dtype=np.int64)
    clf.n_features_in_ = int(scalars["n_features"])
    clf.train_log_ = None
    sigmas = scalars.get("converged_sigmas")
    if sigmas is not None:
        clf.converged_sigmas_ = {k: float(v) for k, v in sigmas.items()}
    if scalars.get("has_feature_stats"):
        stats = Standardizer()
        stats.mean_ = tensors["stats.mean"].reshape(-1)
        stats.std_ = tensors["stats.std"].reshape(-1)
        stats.n_features_in_ = stats.mean_.shape[0]
        clf.feature_stats_ = stats
    else:
        clf.feature_stats_ = None
    return clf
