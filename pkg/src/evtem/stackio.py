"""Binary persistence for frame stacks and simulated images, plus phantom JSON configs.

File layout (little-endian): magic ``EVLS``, version u16, width u32, height u32,
n_frames u32, pixel_size f64 (nm), delta_e f64 (eV), kind u8, then row-major
frame data: i32 counts per frame for counting stacks, f64 for the single-frame
``SIM`` variant emitted by the multi-slice module.
"""

import json
import struct
from dataclasses import asdict

import numpy as np

from .synth import DecayKind, DecayModel, FrameStack, ScenePhantom, StackKind

MAGIC = b"EVLS"
VERSION = 1
_HEADER = "<4sHIIIddB"
_HEADER_SIZE = struct.calcsize(_HEADER)


def write_stack(path, stack):
    """Write a counting FrameStack (INCIDENT/SCATTERED/DIFFERENCE) to `path`."""
    if stack.kind is StackKind.SIM:
        raise ValueError("use write_sim_image for SIM images")
    n, h, w = stack.counts.shape
    header = struct.pack(_HEADER, MAGIC, VERSION, w, h, n,
                         float(stack.pixel_size), float(stack.delta_e),
                         stack.kind.value)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(stack.counts, dtype="<i4").tobytes())


def write_sim_image(path, image, pixel_size, delta_e=0.0):
    """Write a real-valued simulated image as a single-frame f64 SIM stack."""
    image = np.asarray(image, dtype=float)
    h, w = image.shape
    header = struct.pack(_HEADER, MAGIC, VERSION, w, h, 1,
                         float(pixel_size), float(delta_e), StackKind.SIM.value)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(image, dtype="<f8").tobytes())


def _read_header(fh):
    raw = fh.read(_HEADER_SIZE)
    if len(raw) < _HEADER_SIZE:
        raise ValueError("truncated stack file")
    magic, version, w, h, n, pixel_size, delta_e, kind = struct.unpack(_HEADER, raw)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ValueError(f"unsupported stack file version {version}")
    return w, h, n, pixel_size, delta_e, StackKind(kind)


def read_stack(path):
    """Read a stack file; returns a FrameStack (no phantom attached) or, for
    SIM files, a (image, pixel_size, delta_e) tuple."""
    with open(path, "rb") as fh:
        w, h, n, pixel_size, delta_e, kind = _read_header(fh)
        if kind is StackKind.SIM:
            data = np.frombuffer(fh.read(8 * w * h), dtype="<f8").reshape(h, w)
            return data.astype(float), pixel_size, delta_e
        data = np.frombuffer(fh.read(4 * n * h * w), dtype="<i4")
        if data.size != n * h * w:
            raise ValueError("truncated stack payload")
        counts = data.reshape(n, h, w).astype(np.int32)
    return FrameStack(counts=counts, kind=kind, phantom=None,
                      pixel_size=pixel_size, delta_e=delta_e)


def phantom_to_dict(phantom):
    d = asdict(phantom)
    d["decay_model"] = {"kind": phantom.decay_model.kind.value,
                        "length_nm": phantom.decay_model.length_nm}
    return d


def phantom_from_dict(d):
    known = {"width_px", "height_px", "pixel_size", "interface_col",
             "mu_background", "mu_bulk", "mu_interface", "decay_model", "delta_e"}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown phantom config keys: {sorted(unknown)}")
    missing = known - set(d)
    if missing:
        raise ValueError(f"missing phantom config keys: {sorted(missing)}")
    dm = d["decay_model"]
    model = DecayModel(kind=DecayKind(dm["kind"]), length_nm=float(dm["length_nm"]))
    return ScenePhantom(
        width_px=int(d["width_px"]), height_px=int(d["height_px"]),
        pixel_size=float(d["pixel_size"]), interface_col=int(d["interface_col"]),
        mu_background=float(d["mu_background"]), mu_bulk=float(d["mu_bulk"]),
        mu_interface=float(d["mu_interface"]), decay_model=model,
        delta_e=float(d["delta_e"]),
    )


def load_phantom(path):
    """Load a ScenePhantom from a UTF-8 JSON document; unknown keys are rejected."""
    with open(path, encoding="utf-8") as fh:
        return phantom_from_dict(json.load(fh))


def save_phantom(path, phantom):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(phantom_to_dict(phantom), fh, indent=2, sort_keys=True)
        fh.write("\n")
