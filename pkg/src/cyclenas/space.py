"""Cell vocabulary, architecture documents, softmax relaxation and cardinality arithmetic."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

GENERATOR = "generator"
DISCRIMINATOR = "discriminator"
FULL_SYSTEM = "full_system"

DISCRIMINATOR_CELLS = 2


class CellType(str, Enum):
    ENCODING = "e"
    RESIDUAL = "r"
    DECODING = "d"


# Canonical listing order is load-bearing: alpha vectors are indexed by it,
# ties discretize to the lowest index, and serialization uses these names.
ENCODING_OPS = ("max_pool", "avg_pool", "conv3x3", "conv4x4", "conv5x5",
                "conv7x7", "dilconv3x3", "dilconv5x5")
RESIDUAL_OPS = ("conv3x3", "conv5x5", "conv7x7", "dilconv3x3", "dilconv5x5")
DECODING_OPS = ("nearest", "bilinear", "transconv3x3")

_OP_SETS = {
    CellType.ENCODING: ENCODING_OPS,
    CellType.RESIDUAL: RESIDUAL_OPS,
    CellType.DECODING: DECODING_OPS,
}

# kernel size and dilation for the convolution vocabulary
CONV_GEOMETRY = {
    "conv3x3": (3, 1),
    "conv4x4": (4, 1),
    "conv5x5": (5, 1),
    "conv7x7": (7, 1),
    "dilconv3x3": (3, 2),
    "dilconv5x5": (5, 2),
}


class SpecError(ValueError):
    """Raised when an architecture document does not validate."""


def operation_set(cell_type: CellType | str) -> tuple[str, ...]:
    """The ordered operation vocabulary of a cell type."""
    return _OP_SETS[CellType(cell_type)]


def mixture_weights(alpha: np.ndarray) -> np.ndarray:
    """Softmax of an architecture-weight vector (pure numpy side)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.ndim != 1 or alpha.size < 1:
        raise ValueError(f"mixture_weights expects a non-empty 1-D vector, got shape {alpha.shape}")
    if not np.all(np.isfinite(alpha)):
        raise ValueError("mixture_weights requires finite weights")
    e = np.exp(alpha - alpha.max())
    return e / e.sum()


@dataclass(frozen=True)
class CellSpec:
    type: CellType
    op1: str
    op2: str

    def __post_init__(self):
        ops = operation_set(self.type)
        for label, op in (("op1", self.op1), ("op2", self.op2)):
            if op not in ops:
                raise SpecError(f"{label}: unknown operation '{op}' for cell type '{self.type.value}'")


@dataclass(frozen=True)
class ArchitectureSpec:
    """A discrete architecture: ordered cells plus the restored hidden dimension."""

    role: str
    cells: tuple[CellSpec, ...]
    hidden_dim: int

    def __post_init__(self):
        if self.hidden_dim < 1:
            raise SpecError(f"hidden_dim must be positive, got {self.hidden_dim}")
        types = [c.type for c in self.cells]
        if self.role == GENERATOR:
            if len(self.cells) < 3:
                raise SpecError(f"generator needs at least 3 cells, got {len(self.cells)}")
            expected = ([CellType.ENCODING] + [CellType.RESIDUAL] * (len(self.cells) - 2)
                        + [CellType.DECODING])
            if types != expected:
                raise SpecError("generator cells must be one encoding, residuals, one decoding")
        elif self.role == DISCRIMINATOR:
            if types != [CellType.ENCODING] * DISCRIMINATOR_CELLS:
                raise SpecError("discriminator cells must be two encoding cells")
        else:
            raise SpecError(f"unknown role '{self.role}'")

    @property
    def n(self) -> int:
        return len(self.cells)


@dataclass
class AlphaTable:
    """Continuous architecture weights: one vector per cell slot."""

    role: str
    cells: list[tuple[CellType, np.ndarray, np.ndarray]]

    def __post_init__(self):
        for ci, (ctype, a1, a2) in enumerate(self.cells):
            ctype = CellType(ctype)
            want = len(operation_set(ctype))
            a1 = np.asarray(a1, dtype=np.float64)
            a2 = np.asarray(a2, dtype=np.float64)
            for label, vec in (("slot1", a1), ("slot2", a2)):
                if vec.shape != (want,):
                    raise SpecError(
                        f"cells[{ci}].{label}: alpha length {vec.shape} does not match "
                        f"|S^{ctype.value}| = {want}")
                if not np.all(np.isfinite(vec)):
                    raise SpecError(f"cells[{ci}].{label}: alpha values must be finite")
            self.cells[ci] = (ctype, a1, a2)

    def to_json_dict(self) -> dict:
        return {
            "role": self.role,
            "N": len(self.cells),
            "cells": [
                {"type": ctype.value, "slot1": a1.tolist(), "slot2": a2.tolist()}
                for ctype, a1, a2 in self.cells
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "AlphaTable":
        try:
            cells = [(CellType(c["type"]), np.asarray(c["slot1"]), np.asarray(c["slot2"]))
                     for c in doc["cells"]]
            return cls(role=doc["role"], cells=cells)
        except (KeyError, TypeError) as exc:
            raise SpecError(f"malformed alpha table: {exc}") from None


def _cell_layout(role: str, n: int | None) -> list[CellType]:
    if role == GENERATOR:
        if n is None or n < 3:
            raise ValueError(f"generator requires N >= 3, got {n}")
        return [CellType.ENCODING] + [CellType.RESIDUAL] * (n - 2) + [CellType.DECODING]
    if role == DISCRIMINATOR:
        return [CellType.ENCODING] * DISCRIMINATOR_CELLS
    raise ValueError(f"unknown role '{role}'")


def search_space_size(role: str, n: int | None = None) -> int:
    """Exact number of discrete architectures (big-integer arithmetic)."""
    if role == FULL_SYSTEM:
        return search_space_size(GENERATOR, n) ** 2 * search_space_size(DISCRIMINATOR) ** 2
    total = 1
    for ctype in _cell_layout(role, n):
        total *= len(operation_set(ctype)) ** 2
    return total


def scientific(n: int) -> str:
    """Render a positive integer as 'm.d×10^k' with one mantissa decimal."""
    if n <= 0:
        raise ValueError("scientific() expects a positive integer")
    k = len(str(n)) - 1
    mantissa = round(n / 10 ** k, 1)
    if mantissa >= 10.0:
        mantissa /= 10.0
        k += 1
    return f"{mantissa:.1f}×10^{k}"


def discretize(role: str, n: int | None, table: AlphaTable, hidden_dim: int) -> ArchitectureSpec:
    """Pick the highest-weight operation per slot (ties to the lowest canonical index)."""
    layout = _cell_layout(role, n)
    if table.role != role:
        raise SpecError(f"alpha table role '{table.role}' does not match '{role}'")
    if len(table.cells) != len(layout):
        raise SpecError(f"alpha table has {len(table.cells)} cells, layout needs {len(layout)}")
    cells = []
    for ci, (want_type, (ctype, a1, a2)) in enumerate(zip(layout, table.cells)):
        if ctype != want_type:
            raise SpecError(f"cells[{ci}]: expected type '{want_type.value}', got '{ctype.value}'")
        ops = operation_set(ctype)
        cells.append(CellSpec(ctype, ops[int(np.argmax(a1))], ops[int(np.argmax(a2))]))
    return ArchitectureSpec(role=role, cells=tuple(cells), hidden_dim=hidden_dim)


def encode_spec(spec: ArchitectureSpec) -> str:
    doc = {
        "role": spec.role,
        "N": spec.n,
        "hidden_dim": spec.hidden_dim,
        "cells": [{"type": c.type.value, "op1": c.op1, "op2": c.op2} for c in spec.cells],
    }
    return json.dumps(doc, indent=2) + "\n"


def decode_spec(text: str) -> ArchitectureSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SpecError("top level: expected a JSON object")
    for key in ("role", "N", "hidden_dim", "cells"):
        if key not in doc:
            raise SpecError(f"top level: missing key '{key}'")
    if not isinstance(doc["cells"], list):
        raise SpecError("cells: expected a list")
    cells = []
    for ci, c in enumerate(doc["cells"]):
        if not isinstance(c, dict):
            raise SpecError(f"cells[{ci}]: expected an object")
        for key in ("type", "op1", "op2"):
            if key not in c:
                raise SpecError(f"cells[{ci}]: missing key '{key}'")
        try:
            ctype = CellType(c["type"])
        except ValueError:
            raise SpecError(f"cells[{ci}].type: unknown cell type '{c['type']}'") from None
        try:
            cells.append(CellSpec(ctype, c["op1"], c["op2"]))
        except SpecError as exc:
            raise SpecError(f"cells[{ci}].{exc}") from None
    if doc["N"] != len(cells):
        raise SpecError(f"N: declared {doc['N']} cells but document has {len(cells)}")
    try:
        return ArchitectureSpec(role=doc["role"], cells=tuple(cells), hidden_dim=doc["hidden_dim"])
    except SpecError as exc:
        raise SpecError(str(exc)) from None
