# app/crud/checkpoint.py - Save and restore models as .npz checkpoints

import json
import logging
from pathlib import Path
from typing import Dict

import numpy as np

from app.core import autodiff as ad
from app.core.config import settings
from app.core.exceptions import DataFormatError, MissingArtifactError
from app.core.rng import Rng
from app.models.adapters import Decoder, Encoder
from app.models.layers import CoreLayer
from app.models.multitask import MultitaskModel
from app.models.ordering import OrderingSpec
from app.utils.files import write_npz_atomic

logger = logging.getLogger(__name__)

MAGIC_KEY = "__magic__"
VERSION_KEY = "__version__"
HEADER_KEY = "__header__"
PARAM_PREFIX = "param/"

# ========== SAVE ==========

def save_checkpoint(model: MultitaskModel, path) -> Path:
    """Magic, format version, JSON model header and one array per named parameter"""
    header = model.describe()
    header["parameters"] = {name: list(p.shape) for name, p in model.named_parameters().items()}
    arrays: Dict[str, np.ndarray] = {
        MAGIC_KEY: np.array(settings.CHECKPOINT_MAGIC),
        VERSION_KEY: np.array(settings.CHECKPOINT_VERSION),
        HEADER_KEY: np.array(json.dumps(header, sort_keys=True)),
    }
    for name, param in model.named_parameters().items():
        arrays[PARAM_PREFIX + name] = np.array(param.value)
    return write_npz_atomic(path, arrays)


# ========== LOAD ==========

def read_checkpoint(path):
    """(header dict, {parameter name: array}) after magic/version checks"""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"checkpoint not found: {path}", field="model.npz")
    try:
        with np.load(path, allow_pickle=False) as data:
            contents = {key: np.array(data[key]) for key in data.files}
    except (OSError, ValueError) as e:
        raise DataFormatError(f"{path.name} is not a readable checkpoint: {e}", field="container")
    if MAGIC_KEY not in contents or str(contents[MAGIC_KEY]) != settings.CHECKPOINT_MAGIC:
        raise DataFormatError(f"{path.name} does not carry the {settings.CHECKPOINT_MAGIC} magic", field="magic")
    version = int(contents.get(VERSION_KEY, -1))
    if version != settings.CHECKPOINT_VERSION:
        raise DataFormatError(f"unsupported checkpoint version {version}", field="version")
    header = json.loads(str(contents[HEADER_KEY]))
    params = {key[len(PARAM_PREFIX):]: value for key, value in contents.items() if key.startswith(PARAM_PREFIX)}
    return header, params


def model_from_header(header: Dict) -> MultitaskModel:
    rng = Rng(header["seed"])
    core_desc = header["core"]
    core = [
        CoreLayer(j, core_desc["kind"], core_desc["size"], core_desc["activation"], rng)
        for j in range(header["depth"])
    ]
    encoders = [
        Encoder(d["name"], d["kind"], d["in_features"], d["out_features"], rng=rng, seed=d.get("seed"))
        for d in header["encoders"]
    ]
    decoders = [
        Decoder(d["name"], d["kind"], d["in_features"], d["out_features"], rng=rng)
        for d in header["decoders"]
    ]
    ordering = OrderingSpec.from_description(header["ordering"])
    logits = None
    if "scaling.logits" in header.get("parameters", {}):
        logits = ad.Parameter("scaling.logits", np.zeros(header["parameters"]["scaling.logits"]))
    return MultitaskModel(
        core,
        [encoders[slot] for slot in header["encoder_slots"]],
        [decoders[slot] for slot in header["decoder_slots"]],
        ordering,
        dropout_rate=header["dropout_rate"],
        seed=header["seed"],
        logits=logits,
    )


def load_checkpoint(path) -> MultitaskModel:
    header, params = read_checkpoint(path)
    model = model_from_header(header)
    named = model.named_parameters()
    if set(named) != set(params):
        missing = sorted(set(named) ^ set(params))
        raise DataFormatError(f"parameter set mismatch: {missing}", field="parameters")
    for name, param in named.items():
        if params[name].shape != param.shape:
            raise DataFormatError(f"{name} has shape {params[name].shape}, expected {param.shape}", field=name)
        param.value = params[name]
    logger.debug(f"loaded {len(named)} parameters from {path}")
    return model
