"""Binary checkpoints: one JSON header line followed by raw coefficient blocks.

Layout::

    BSQCKPT\\n
    {"schema_version": 1, ...}\\n
    <payload>

The payload concatenates complex128 little-endian arrays ('<c16', i.e. pairs
of little-endian float64), C order with n_xi outermost and k innermost, one
block per field component. Blocks are listed by name in the header.
"""

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from app.core.spectral import Domain
from app.core.state import State
from app.errors import CorruptionError
from app.services.monitors import MonitorRecorder
from app.utils.logging import get_logger

logger = get_logger(__name__)

MAGIC = b"BSQCKPT\n"
SCHEMA_VERSION = 1
DTYPE = np.dtype("<c16")
COMPONENTS = ("omega1", "omega2", "omega3", "theta")


@dataclass
class Checkpoint:
    """Decoded checkpoint contents."""
    header: Dict[str, Any]
    states: Dict[str, State] = field(default_factory=dict)

    @property
    def state(self) -> State:
        return self.states["state"]

    @property
    def step(self) -> int:
        return int(self.header["step"])

    @property
    def config(self) -> Dict[str, Any]:
        return self.header["config"]

    def recorder(self) -> Optional[MonitorRecorder]:
        data = self.header.get("recorder")
        if data is None:
            return None
        return MonitorRecorder.restore(data, self.states.get("prev"), self.states.get("pending"))


def _norms(states: Dict[str, State]) -> Dict[str, List[float]]:
    return {
        name: [float(np.sqrt(np.sum(np.abs(c.coeff) ** 2))) for c in s.components]
        for name, s in states.items()
    }


def _digest(data: Union[bytes, str]) -> str:
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()


def encode(
    config: Dict[str, Any],
    state: State,
    step: int,
    recorder: Optional[MonitorRecorder] = None,
) -> bytes:
    """Serialize a state (and the recorder's buffered samples) to bytes."""
    states = {"state": state}
    if recorder is not None:
        if recorder.prev is not None:
            states["prev"] = recorder.prev
        if recorder.pending is not None:
            states["pending"] = recorder.pending

    blocks = []
    payload = bytearray()
    for name, s in states.items():
        for comp, scalar in zip(COMPONENTS, s.components):
            raw = np.ascontiguousarray(scalar.coeff, dtype=DTYPE).tobytes()
            blocks.append({"name": f"{name}.{comp}", "bytes": len(raw)})
            payload.extend(raw)

    norms = _norms(states)
    header = {
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "domain": state.domain.describe(),
        "step": int(step),
        "time": state.time,
        "times": {name: s.time for name, s in states.items()},
        "blocks": blocks,
        "dtype": DTYPE.str,
        "payload_sha256": _digest(bytes(payload)),
        "norms": norms,
        "norms_sha256": _digest(json.dumps(norms, sort_keys=True)),
        "recorder": None if recorder is None else recorder.snapshot(),
    }
    line = json.dumps(header, sort_keys=True).encode()
    return MAGIC + line + b"\n" + bytes(payload)


def decode(blob: bytes) -> Checkpoint:
    if not blob.startswith(MAGIC):
        raise CorruptionError("not a checkpoint file (bad magic)")
    rest = blob[len(MAGIC):]
    newline = rest.find(b"\n")
    if newline < 0:
        raise CorruptionError("checkpoint header is truncated")
    try:
        header = json.loads(rest[:newline].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptionError(f"checkpoint header is not valid JSON: {e}") from e
    if header.get("schema_version") != SCHEMA_VERSION:
        raise CorruptionError(
            f"unsupported checkpoint schema {header.get('schema_version')!r}",
            {"expected": SCHEMA_VERSION},
        )

    payload = rest[newline + 1:]
    expected = sum(b["bytes"] for b in header["blocks"])
    if len(payload) != expected:
        raise CorruptionError(
            f"payload holds {len(payload)} bytes, header announces {expected}",
        )
    if _digest(payload) != header["payload_sha256"]:
        raise CorruptionError("checkpoint payload digest mismatch")

    d = header["domain"]
    domain = Domain(Nx=d["Nx"], Ny=d["Ny"], Kmax=d["Kmax"], Nz=d["Nz"], L=d["L"])
    arrays: Dict[str, List[np.ndarray]] = {}
    offset = 0
    for block in header["blocks"]:
        name = block["name"].split(".")[0]
        chunk = payload[offset:offset + block["bytes"]]
        offset += block["bytes"]
        arrays.setdefault(name, []).append(
            np.frombuffer(chunk, dtype=DTYPE).reshape(domain.shape).astype(complex)
        )

    states = {
        name: State.from_components(domain, comps, header["times"][name])
        for name, comps in arrays.items()
    }
    if _digest(json.dumps(_norms(states), sort_keys=True)) != header["norms_sha256"]:
        raise CorruptionError("checkpoint norms digest mismatch")
    return Checkpoint(header=header, states=states)


def save_checkpoint(
    path: Union[str, Path],
    config: Dict[str, Any],
    state: State,
    step: int,
    recorder: Optional[MonitorRecorder] = None,
) -> Path:
    """Write atomically through a temporary sibling file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode(config, state, step, recorder))
    os.replace(tmp, path)
    logger.info(f"Checkpoint written to {path}", step=step, time=state.time)
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    checkpoint = decode(path.read_bytes())
    logger.info(f"Checkpoint loaded from {path}", step=checkpoint.step)
    return checkpoint
