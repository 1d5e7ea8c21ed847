"""Flattenings of posture sequences into fixed-size coordinate matrices.

Each encoding maps a sequence of T postures to a matrix whose columns are
tangent coordinates at one shared reference posture, so that ordinary
vector-space statistics apply:

* ``stvf``  - shooting vectors (discrete velocities), each transported
  from its own frame straight to the reference in one hop.
* ``istvf`` - running integral of the stvf columns (cumulative sum times
  dt); inverts exactly by first differences.
* ``siem``  - log-map coordinates of every frame at the reference; encodes
  positions rather than velocities (T columns instead of T-1).
* ``mtvf``  - velocities transported step by step through all earlier
  frames before reaching the reference.  Kept as a control: decoding
  transports each column back in a single hop, which does not undo the
  multi-hop chain (parallel transport is path dependent), so its
  reconstruction error grows along the sequence.

Velocity columns are scaled by 1/dt = T-1; decoding scales them back by
the field's dt before exponentiating.
"""

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .errors import DimensionMismatch, KindMismatch

FLATTEN_KINDS = ("stvf", "istvf", "siem", "mtvf")
VELOCITY_KINDS = ("stvf", "istvf", "mtvf")


@dataclass
class FlatField:
    """A flattened sequence: kind tag, reference posture, start posture
    (needed to invert the velocity kinds), value matrix of shape
    (2*(n-1), L) and grid spacing dt."""

    kind: str
    reference: np.ndarray
    start: np.ndarray | None
    values: np.ndarray
    dt: float

    def __post_init__(self):
        if self.kind not in FLATTEN_KINDS:
            raise KindMismatch(f"unknown flattening kind {self.kind!r}")
        k = self.reference.shape[0]
        if self.values.ndim != 2 or self.values.shape[0] != 2 * k:
            raise DimensionMismatch(
                f"values must have {2 * k} rows for {k} bones, got {self.values.shape}")

    @property
    def length(self) -> int:
        return int(self.values.shape[1])


def _check_sequence(seq):
    seq = np.asarray(seq, dtype=float)
    if seq.ndim != 3 or seq.shape[0] < 2 or seq.shape[2] != 3:
        raise DimensionMismatch(f"expected a (T, n-1, 3) sequence with T >= 2, got {seq.shape}")
    return seq


def _require_kind(field: FlatField, kind: str):
    if field.kind != kind:
        raise KindMismatch(f"expected a {kind!r} field, got {field.kind!r}")


def _single_hop_decode(field: FlatField):
    """Grow a sequence from velocity columns stored at the reference:
    transport each column to the newest frame, scale by dt, exponentiate."""
    if field.start is None:
        raise DimensionMismatch(f"{field.kind} field is missing its start posture")
    steps = geo.coords_to_tangent(field.reference, field.values.T)
    frames = [field.start.copy()]
    for t in range(field.length):
        v = geo.sphere_transport(field.reference, frames[-1], steps[t])
        frames.append(geo.sphere_exp(frames[-1], v * field.dt))
    return np.stack(frames)


def stvf_encode(seq, reference) -> FlatField:
    """Encode shooting vectors, each transported directly to the
    reference posture.  Column norms equal the shooting-vector norms
    because transport and the coordinate map are isometries."""
    seq = _check_sequence(seq)
    reference = np.asarray(reference, dtype=float)
    t = seq.shape[0]
    steps = geo.posture_log(seq[:-1], seq[1:]) * (t - 1)
    moved = geo.posture_transport(seq[:-1], reference, steps)
    coords = geo.tangent_coords(reference, moved)
    return FlatField("stvf", reference.copy(), seq[0].copy(), coords.T.copy(), 1.0 / (t - 1))


def stvf_decode(field: FlatField):
    """Invert stvf_encode: transport each column back to the frame being
    grown and exponentiate the dt-scaled step."""
    _require_kind(field, "stvf")
    return _single_hop_decode(field)


def istvf_encode(field: FlatField) -> FlatField:
    """Integrate an stvf field: column t becomes the Riemann sum of
    columns 0..t scaled by dt."""
    _require_kind(field, "stvf")
    return FlatField("istvf", field.reference, field.start,
                     np.cumsum(field.values, axis=1) * field.dt, field.dt)


def istvf_to_stvf(field: FlatField) -> FlatField:
    """Differentiate an istvf field back to stvf by first differences."""
    _require_kind(field, "istvf")
    values = np.concatenate([field.values[:, :1], np.diff(field.values, axis=1)], axis=1)
    return FlatField("stvf", field.reference, field.start, values / field.dt, field.dt)


def istvf_decode(field: FlatField):
    """Invert istvf_encode back to a posture sequence."""
    return stvf_decode(istvf_to_stvf(field))


def siem_encode(seq, reference) -> FlatField:
    """Encode every frame by its log-map coordinates at the reference.

    Produces T columns.  Frames antipodal to the reference are rejected
    by the log map.
    """
    seq = _check_sequence(seq)
    reference = np.asarray(reference, dtype=float)
    logs = geo.sphere_log(reference, seq)
    coords = geo.tangent_coords(reference, logs)
    t = seq.shape[0]
    return FlatField("siem", reference.copy(), seq[0].copy(), coords.T.copy(), 1.0 / (t - 1))


def siem_decode(field: FlatField):
    """Invert siem_encode: exponentiate every column at the reference."""
    _require_kind(field, "siem")
    vecs = geo.coords_to_tangent(field.reference, field.values.T)
    return geo.sphere_exp(field.reference, vecs)


def mtvf_encode(seq, reference) -> FlatField:
    """Encode shooting vectors transported through every earlier frame
    before reaching the reference (the multi-hop control)."""
    seq = _check_sequence(seq)
    reference = np.asarray(reference, dtype=float)
    t = seq.shape[0]
    steps = geo.posture_log(seq[:-1], seq[1:]) * (t - 1)
    moved = steps.copy()
    # Walk the chain backwards, dragging every not-yet-finished column
    # down one hop per iteration so each numpy call stays batched.
    for s in range(t - 2, 0, -1):
        moved[s:] = geo.sphere_transport(seq[s], seq[s - 1], moved[s:])
    moved = geo.sphere_transport(seq[0], reference, moved)
    coords = geo.tangent_coords(reference, moved)
    return FlatField("mtvf", reference.copy(), seq[0].copy(), coords.T.copy(), 1.0 / (t - 1))


def mtvf_decode(field: FlatField):
    """Reconstruct from a multi-hop field with the same single-hop-back
    recursion the velocity kinds share.  A single hop cannot undo the
    path-dependent multi-hop transport, so the decoded sequence drifts
    from the original more and more as t grows; the drift is the reason
    this kind is a control rather than a usable representation."""
    _require_kind(field, "mtvf")
    return _single_hop_decode(field)


def flatten_sequence(seq, reference, kind: str) -> FlatField:
    """Dispatch to the encoder for the requested kind."""
    if kind == "stvf":
        return stvf_encode(seq, reference)
    if kind == "istvf":
        return istvf_encode(stvf_encode(seq, reference))
    if kind == "siem":
        return siem_encode(seq, reference)
    if kind == "mtvf":
        return mtvf_encode(seq, reference)
    raise KindMismatch(f"unknown flattening kind {kind!r}")


def unflatten_field(field: FlatField):
    """Dispatch to the decoder for the field's kind."""
    if field.kind == "stvf":
        return stvf_decode(field)
    if field.kind == "istvf":
        return istvf_decode(field)
    if field.kind == "siem":
        return siem_decode(field)
    return mtvf_decode(field)


def recon_error(seq, decoded):
    """Per-frame posture distance between a sequence and its decoding."""
    seq = np.asarray(seq, dtype=float)
    decoded = np.asarray(decoded, dtype=float)
    if seq.shape != decoded.shape:
        raise DimensionMismatch(f"shapes differ: {seq.shape} vs {decoded.shape}")
    return geo.posture_dist(seq, decoded)
