"""Storage tiers for the whitened system and their byte footprints.

Tiers, from largest to smallest:

* ``DENSE``       the full ``A_b`` and ``eps_b`` rectangles;
* ``SPARSE_TYPED`` per-factor ``eps_bi`` and ``A_bi`` blocks plus a type tag and
  variable indexes;
* ``SEQUENTIAL``  the same values laid out in the fixed chain order, no tags or
  indexes (the chain makes them implicit);
* ``COMPRESSED``  sequential minus everything the factor structure determines:
  structurally zero entries, identity columns (stored once as the whitening
  column they turn into) and the mirrored half of between/motion blocks.

Encoded stream (little endian)::

    "CFG1" | tier u8 | layout code u8 | keyframes u32 | presence u8 * n | payload

``presence`` has one bit per slot (prior, gps, between, motion) for each
keyframe; the payload holds float64 values in canonical factor order.
"""

import enum
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InvalidArgumentError
from .factors import DENSE as COL_DENSE
from .factors import (NEG, UNIT, BetweenFactor, GpsFactor, MotionFactor, PriorFactor, StateLayout,
                      WhitenedBlockRow, linearize)
from .graph import SLOTS

MAGIC = b"CFG1"
HEADER = struct.Struct("<4sBBI")

# reported memory reductions versus dense storage (for side-by-side display only)
REPORTED_RATIOS = {"step1": 15.5, "step2": 19.0, "step3": 56.3}

_PROTOTYPES = {
    "prior": lambda lay: PriorFactor(index=1, sigma=np.eye(lay.state_dim), z=np.zeros(lay.state_dim)),
    "gps": lambda lay: GpsFactor(index=1, sigma=np.eye(2), z=np.zeros(2)),
    "between": lambda lay: BetweenFactor(index=1, sigma=np.eye(lay.pose_dim), z=np.zeros(lay.pose_dim)),
    "motion": lambda lay: MotionFactor(index=1, dt=1.0, sigma=np.eye(2 + lay.vel_dim + lay.bias_dim)),
}


class StorageTier(enum.IntEnum):
    DENSE = 0
    SPARSE_TYPED = 1
    SEQUENTIAL = 2
    COMPRESSED = 3

    @property
    def label(self):
        return ("dense", "step1", "step2", "step3")[self.value]

    @classmethod
    def from_label(cls, label):
        for t in cls:
            if label in (t.label, t.name.lower()):
                return t
        raise InvalidArgumentError(f"unknown storage tier {label!r}")


@dataclass
class FootprintReport:
    tier: StorageTier
    bytes: int
    breakdown: dict = field(default_factory=dict)


def _structure(slot, layout):
    return _PROTOTYPES[slot](layout).structure(layout)


def _compressed_plan(slot, layout):
    """(unit ks, [(block, col, first_row)] for dense columns) for one factor slot."""
    specs = _structure(slot, layout)
    units = sorted({s.arg for cols in specs for s in cols if s.kind == UNIT})
    dense = [(b, c, s.arg) for b, cols in enumerate(specs) for c, s in enumerate(cols)
             if s.kind == COL_DENSE]
    return units, dense, specs


def _compressed_values(slot, layout, dim):
    units, dense, _ = _compressed_plan(slot, layout)
    return dim + sum(dim - k for k in units) + sum(dim - r for _, _, r in dense)


def _iter_slots(graph):
    for j in range(1, graph.n + 1):
        for slot in SLOTS:
            f = graph.slot(slot).get(j)
            if f is not None:
                yield slot, f


def footprint(graph, tier, scalar_bytes=8):
    """Byte footprint of the whitened system of ``graph`` under ``tier``."""
    tier = StorageTier(tier)
    if scalar_bytes not in (4, 8):
        raise InvalidArgumentError("scalar_bytes must be 4 or 8")
    layout, d = graph.layout, graph.layout.state_dim
    items = [(slot, f, f.dim(layout)) for slot, f in _iter_slots(graph)]
    if tier == StorageTier.DENSE:
        rows = sum(dim for _, _, dim in items)
        vals = rows * graph.n * d + rows
        return FootprintReport(tier, vals * scalar_bytes, {"values": vals * scalar_bytes})
    if tier == StorageTier.COMPRESSED:
        vals = sum(_compressed_values(slot, layout, dim) for slot, _, dim in items)
        return FootprintReport(tier, vals * scalar_bytes, {"values": vals * scalar_bytes})
    vals = sum(dim + dim * d * len(f.keys) for _, f, dim in items)
    out = {"values": vals * scalar_bytes}
    if tier == StorageTier.SPARSE_TYPED:
        out["types"] = len(items)
        out["indices"] = 4 * sum(len(f.keys) for _, f, _ in items)
    return FootprintReport(tier, sum(out.values()), out)


def footprint_table(graph, tiers=tuple(StorageTier), scalar_bytes=8):
    """Rows of (tier label, bytes, dense/bytes ratio)."""
    if graph.n == 0:
        return []
    dense = footprint(graph, StorageTier.DENSE, scalar_bytes).bytes
    rows = []
    for t in tiers:
        b = footprint(graph, t, scalar_bytes).bytes
        rows.append((StorageTier(t).label, b, dense / b if b else float("inf")))
    return rows


def encode(graph, states, tier=StorageTier.SEQUENTIAL):
    """Serialize the whitened block rows of ``graph`` linearized at ``states``."""
    tier = StorageTier(tier)
    if tier not in (StorageTier.SEQUENTIAL, StorageTier.COMPRESSED):
        raise InvalidArgumentError(f"encode supports the sequential and compressed tiers, not {tier.label}")
    layout = graph.layout
    out = [HEADER.pack(MAGIC, int(tier), layout.code, graph.n)]
    mask = bytearray(graph.n)
    for j in range(1, graph.n + 1):
        for bit, slot in enumerate(SLOTS):
            if j in graph.slot(slot):
                mask[j - 1] |= 1 << bit
    out.append(bytes(mask))
    values = []
    for slot, f in _iter_slots(graph):
        row = linearize(f, states, layout)
        values.append(row.residual)
        blocks = [blk for _, blk in row.blocks]
        if tier == StorageTier.SEQUENTIAL:
            values.extend(blk.ravel() for blk in blocks)
            continue
        units, dense, specs = _compressed_plan(slot, layout)
        for k in units:
            b, c = next((b, c) for b, cols in enumerate(specs) for c, s in enumerate(cols)
                        if s.kind == UNIT and s.arg == k)
            values.append(blocks[b][k:, c])
        for b, c, r in dense:
            values.append(blocks[b][r:, c])
    if values:
        out.append(np.concatenate(values).astype("<f8").tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, data, pos):
        self.data, self.pos = data, pos

    def floats(self, count):
        need = 8 * count
        if self.pos + need > len(self.data):
            raise FormatError(f"truncated stream: need {need} bytes, have {len(self.data) - self.pos}",
                              offset=self.pos)
        arr = np.frombuffer(self.data, dtype="<f8", count=count, offset=self.pos).astype(float)
        self.pos += need
        return arr


def decode(data, layout=None, n=None, tier=None):
    """Inverse of :func:`encode`; returns ``(layout, n, [WhitenedBlockRow, ...])``.

    ``layout``/``n``/``tier``, when given, must match the header.
    """
    data = bytes(data)
    if len(data) < HEADER.size:
        raise FormatError("truncated header", offset=len(data))
    magic, tier_code, layout_code, count = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    try:
        got_tier = StorageTier(tier_code)
    except ValueError:
        raise FormatError(f"unknown tier code {tier_code}", offset=4) from None
    if got_tier not in (StorageTier.SEQUENTIAL, StorageTier.COMPRESSED):
        raise FormatError(f"tier {got_tier.label} has no stream encoding", offset=4)
    got_layout = StateLayout.from_code(layout_code)
    for want, got, what in ((layout, got_layout, "layout"), (n, count, "keyframe count"),
                            (tier, got_tier, "tier")):
        if want is not None and want != got:
            raise FormatError(f"{what} mismatch: header has {got}, expected {want}", offset=4)
    pos = HEADER.size
    if pos + count > len(data):
        raise FormatError("truncated presence mask", offset=len(data))
    mask = data[pos:pos + count]
    reader = _Reader(data, pos + count)
    d = got_layout.state_dim
    rows = []
    for j in range(1, count + 1):
        for bit, slot in enumerate(SLOTS):
            if not mask[j - 1] >> bit & 1:
                continue
            proto = _PROTOTYPES[slot](got_layout)
            dim = proto.dim(got_layout)
            keys = (j,) if slot in ("prior", "gps") else (j, j + 1)
            if len(keys) == 2 and j >= count:
                raise FormatError(f"{slot} factor at last keyframe {j}", offset=pos + j - 1)
            eps = reader.floats(dim)
            if got_tier == StorageTier.SEQUENTIAL:
                blocks = [reader.floats(dim * d).reshape(dim, d) for _ in keys]
            else:
                blocks = _decode_compressed(reader, slot, got_layout, dim, len(keys))
            rows.append(WhitenedBlockRow(eps, tuple(zip(keys, blocks)), proto.type_name))
        if mask[j - 1] >> len(SLOTS):
            raise FormatError(f"unknown presence bits for keyframe {j}", offset=pos + j - 1)
    if reader.pos != len(data):
        raise FormatError(f"{len(data) - reader.pos} trailing bytes", offset=reader.pos)
    return got_layout, count, rows


def _decode_compressed(reader, slot, layout, dim, nblocks):
    units, dense, specs = _compressed_plan(slot, layout)
    d = layout.state_dim
    w_cols = {}
    for k in units:
        col = np.zeros(dim)
        col[k:] = reader.floats(dim - k)
        w_cols[k] = col
    blocks = [np.zeros((dim, d)) for _ in range(nblocks)]
    for b, c, r in dense:
        blocks[b][r:, c] = reader.floats(dim - r)
    for b, cols in enumerate(specs):
        for c, s in enumerate(cols):
            if s.kind == UNIT:
                blocks[b][:, c] = w_cols[s.arg]
    for b, cols in enumerate(specs):
        for c, s in enumerate(cols):
            if s.kind == NEG:
                blocks[b][:, c] = -blocks[1 - b][:, c]
    return [blk + 0.0 for blk in blocks]


__all__ = ["StorageTier", "FootprintReport", "footprint", "footprint_table", "encode", "decode",
           "REPORTED_RATIOS"]
