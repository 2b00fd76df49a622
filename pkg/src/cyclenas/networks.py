"""Searchable translation networks.

Builds supernets whose slots hold every candidate operation behind a softmax
mixture, discretized networks with one chosen operation per slot, and the
fixed reference generator used for size-matched comparisons.  Also owns size
accounting and the weight checkpoint format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .seeding import rng_for
from .space import (
    CONV_GEOMETRY,
    DISCRIMINATOR,
    GENERATOR,
    AlphaTable,
    ArchitectureSpec,
    CellType,
    mixture_weights,
    operation_set,
)

WEIGHT_INIT_STD = 0.02
BYTES_PER_PARAM = 4  # single-precision-equivalent accounting

DOWN, SAME, UP = "down", "same", "up"


# ---------------------------------------------------------------------------
# candidate operations


def candidate_param_shapes(kind: str, cin: int, cout: int) -> dict[str, tuple]:
    """Parameter layout of one candidate operation mapping cin -> cout channels."""
    if kind in CONV_GEOMETRY:
        k, _ = CONV_GEOMETRY[kind]
        return {"weight": (cout, cin, k, k), "bias": (cout,)}
    if kind in ("max_pool", "avg_pool"):
        # parameter-free pooling plus a fixed 1x1 remap for channel consistency
        return {"remap.weight": (cout, cin, 1, 1), "remap.bias": (cout,)}
    if kind in ("nearest", "bilinear"):
        # upsampling plus a fixed 3x3 remap (channel change + mixing)
        return {"remap.weight": (cout, cin, 3, 3), "remap.bias": (cout,)}
    if kind == "transconv3x3":
        return {"weight": (cin, cout, 3, 3)}
    raise ValueError(f"unknown candidate operation '{kind}'")


def candidate_param_count(kind: str, cin: int, cout: int) -> int:
    return sum(int(np.prod(shape)) for shape in candidate_param_shapes(kind, cin, cout).values())


class CandidateOp:
    """One concrete candidate: its parameters and forward rule."""

    def __init__(self, kind: str, cin: int, cout: int, action: str,
                 rng: np.random.Generator):
        if action == UP and kind not in ("nearest", "bilinear", "transconv3x3"):
            raise ValueError(f"candidate '{kind}' cannot upsample")
        if action != UP and kind in ("nearest", "bilinear", "transconv3x3"):
            raise ValueError(f"candidate '{kind}' only upsamples")
        self.kind = kind
        self.cin = cin
        self.cout = cout
        self.action = action
        self.params: dict[str, Tensor] = {}
        for name, shape in candidate_param_shapes(kind, cin, cout).items():
            if name.endswith("bias"):
                data = np.zeros(shape)
            else:
                data = rng.normal(0.0, WEIGHT_INIT_STD, shape)
            self.params[name] = Tensor(data, requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        kind = self.kind
        if kind in CONV_GEOMETRY:
            k, dil = CONV_GEOMETRY[kind]
            stride = 2 if self.action == DOWN else 1
            pad = (dil * (k - 1)) // 2
            return ad.conv2d(x, self.params["weight"], self.params["bias"],
                             stride=stride, padding=pad, dilation=dil)
        if kind in ("max_pool", "avg_pool"):
            pooled = ad.pool2d(x, kind[:3], window=2, stride=2)
            return ad.conv2d(pooled, self.params["remap.weight"], self.params["remap.bias"])
        if kind in ("nearest", "bilinear"):
            up = ad.interpolate2d(x, 2, kind)
            return ad.conv2d(up, self.params["remap.weight"], self.params["remap.bias"],
                             padding=1)
        # transconv3x3
        return ad.conv_transpose2d(x, self.params["weight"], stride=2, padding=1,
                                   output_padding=1)


# ---------------------------------------------------------------------------
# slots and cells


class MixedSlot:
    """All candidates of one vocabulary, combined by the softmax of alpha.

    Instance norm (when present) applies once to the weighted sum, not per
    candidate; the activation follows.
    """

    def __init__(self, name: str, ctype: CellType, cin: int, cout: int,
                 action: str, rng: np.random.Generator, *, norm: bool = True,
                 activation: str = "relu"):
        self.name = name
        self.kinds = operation_set(ctype)
        self.ops = [CandidateOp(kind, cin, cout, action, rng) for kind in self.kinds]
        self.alpha = Tensor(np.zeros(len(self.kinds)), requires_grad=True)
        self.norm = norm
        self.activation = activation

    def mixture(self, x: Tensor, differentiable_alpha: bool = True) -> Tensor:
        outs = [op(x) for op in self.ops]
        if differentiable_alpha:
            beta = ad.softmax(self.alpha)
            terms = [ad.mul(ad.index(beta, i), out) for i, out in enumerate(outs)]
        else:
            beta = mixture_weights(self.alpha.data)
            terms = [ad.scale(out, float(beta[i])) for i, out in enumerate(outs)]
        total = terms[0]
        for term in terms[1:]:
            total = ad.add(total, term)
        return total

    def __call__(self, x: Tensor, differentiable_alpha: bool = True) -> Tensor:
        return _finish_slot(self.mixture(x, differentiable_alpha), self.norm, self.activation)

    def parameters(self) -> dict[str, Tensor]:
        out = {}
        for kind, op in zip(self.kinds, self.ops):
            for pname, p in op.params.items():
                out[f"{self.name}.{kind}.{pname}"] = p
        return out

    def beta(self) -> np.ndarray:
        return mixture_weights(self.alpha.data)

    def argmax_kind(self) -> str:
        return self.kinds[int(np.argmax(self.alpha.data))]

    def entropy(self) -> float:
        b = self.beta()
        return float(-(b * np.log(b)).sum())


class FixedSlot:
    """A single chosen operation with the same norm/activation tail."""

    def __init__(self, name: str, kind: str, cin: int, cout: int, action: str,
                 rng: np.random.Generator, *, norm: bool = True,
                 activation: str = "relu"):
        self.name = name
        self.kind = kind
        self.op = CandidateOp(kind, cin, cout, action, rng)
        self.norm = norm
        self.activation = activation

    def __call__(self, x: Tensor, differentiable_alpha: bool = True) -> Tensor:
        return _finish_slot(self.op(x), self.norm, self.activation)

    def parameters(self) -> dict[str, Tensor]:
        return {f"{self.name}.{self.kind}.{pname}": p for pname, p in self.op.params.items()}


def _finish_slot(t: Tensor, norm: bool, activation: str) -> Tensor:
    if norm:
        t = ad.instance_norm2d(t)
    if activation == "relu":
        return ad.relu(t)
    if activation == "tanh":
        return ad.tanh(t)
    if activation == "none":
        return t
    raise ValueError(f"unknown slot activation '{activation}'")


class Cell:
    def __init__(self, ctype: CellType, slots: list):
        self.type = ctype
        self.slots = slots
        self.residual = ctype is CellType.RESIDUAL

    def __call__(self, x: Tensor, differentiable_alpha: bool = True) -> Tensor:
        y = self.slots[0](x, differentiable_alpha)
        y = self.slots[1](y, differentiable_alpha)
        if self.residual:
            y = ad.add(x, y)
        return y

    def parameters(self) -> dict[str, Tensor]:
        out = {}
        for slot in self.slots:
            out.update(slot.parameters())
        return out


# ---------------------------------------------------------------------------
# layer plans


def layer_plan(role: str, n: int, hidden_dim: int,
               image_channels: int = 3) -> list[tuple[CellType, list[tuple[int, int, str]]]]:
    """Per-cell, per-slot (in_channels, out_channels, spatial action)."""
    h = hidden_dim
    c = image_channels
    if role == GENERATOR:
        if n < 3:
            raise ValueError(f"generator requires N >= 3, got {n}")
        plan = [(CellType.ENCODING, [(c, h, DOWN), (h, h, DOWN)])]
        plan += [(CellType.RESIDUAL, [(h, h, SAME), (h, h, SAME)])] * (n - 2)
        plan += [(CellType.DECODING, [(h, h, UP), (h, c, UP)])]
        return plan
    if role == DISCRIMINATOR:
        return [(CellType.ENCODING, [(c, h, DOWN), (h, h, DOWN)]),
                (CellType.ENCODING, [(h, h, DOWN), (h, h, DOWN)])]
    raise ValueError(f"unknown role '{role}'")


def _slot_tail(role: str, cell_index: int, slot_index: int, n_cells: int) -> dict:
    # Every slot is op -> instance norm -> relu, except the generator's final
    # slot which feeds the tanh output stage directly (norm+relu there would
    # pin the image range to [0, 1)).
    if role == GENERATOR and cell_index == n_cells - 1 and slot_index == 1:
        return {"norm": False, "activation": "tanh"}
    return {"norm": True, "activation": "relu"}


# ---------------------------------------------------------------------------
# networks


class GeneratorNet:
    def __init__(self, mode: str, cells: list[Cell], hidden_dim: int,
                 image_channels: int = 3):
        self.role = GENERATOR
        self.mode = mode
        self.cells = cells
        self.hidden_dim = hidden_dim
        self.image_channels = image_channels

    @property
    def n(self) -> int:
        return len(self.cells)

    def forward(self, x: Tensor, differentiable_alpha: bool = True) -> Tensor:
        _check_image(x, self.image_channels, multiple=4, who="generator")
        for cell in self.cells:
            x = cell(x, differentiable_alpha)
        return x

    __call__ = forward

    def parameters(self) -> dict[str, Tensor]:
        out = {}
        for cell in self.cells:
            out.update(cell.parameters())
        return out

    def alphas(self) -> dict[str, Tensor]:
        if self.mode != "supernet":
            return {}
        return {f"{slot.name}.alpha": slot.alpha
                for cell in self.cells for slot in cell.slots}

    def alpha_table(self) -> AlphaTable:
        if self.mode != "supernet":
            raise ValueError("discrete networks carry no architecture weights")
        return AlphaTable(self.role, [
            (cell.type, cell.slots[0].alpha.data.copy(), cell.slots[1].alpha.data.copy())
            for cell in self.cells
        ])

    def trace_shapes(self, height: int, width: int) -> list[tuple[int, int, int]]:
        """Analytic (channels, h, w) after each cell for a given input size."""
        shapes = []
        h, w = height, width
        for cell in self.cells:
            for slot in cell.slots:
                op = slot.ops[0] if isinstance(slot, MixedSlot) else slot.op
                if op.action == DOWN:
                    h, w = h // 2, w // 2
                elif op.action == UP:
                    h, w = h * 2, w * 2
                channels = op.cout
            shapes.append((channels, h, w))
        return shapes


class DiscriminatorNet:
    """Two encoding cells, then a fixed 1x1-conv + sigmoid + spatial-mean head."""

    def __init__(self, mode: str, cells: list[Cell], head_weight: Tensor,
                 head_bias: Tensor, hidden_dim: int, image_channels: int = 3):
        self.role = DISCRIMINATOR
        self.mode = mode
        self.cells = cells
        self.head_weight = head_weight
        self.head_bias = head_bias
        self.hidden_dim = hidden_dim
        self.image_channels = image_channels

    @property
    def n(self) -> int:
        return len(self.cells)

    def forward(self, x: Tensor, differentiable_alpha: bool = True) -> Tensor:
        _check_image(x, self.image_channels, multiple=16, who="discriminator")
        for cell in self.cells:
            x = cell(x, differentiable_alpha)
        logits = ad.conv2d(x, self.head_weight, self.head_bias)
        return ad.reduce_mean(ad.sigmoid(logits))

    __call__ = forward

    def parameters(self) -> dict[str, Tensor]:
        out = {}
        for cell in self.cells:
            out.update(cell.parameters())
        out["head.weight"] = self.head_weight
        out["head.bias"] = self.head_bias
        return out

    def alphas(self) -> dict[str, Tensor]:
        if self.mode != "supernet":
            return {}
        return {f"{slot.name}.alpha": slot.alpha
                for cell in self.cells for slot in cell.slots}

    def alpha_table(self) -> AlphaTable:
        if self.mode != "supernet":
            raise ValueError("discrete networks carry no architecture weights")
        return AlphaTable(self.role, [
            (cell.type, cell.slots[0].alpha.data.copy(), cell.slots[1].alpha.data.copy())
            for cell in self.cells
        ])


def _check_image(x: Tensor, channels: int, multiple: int, who: str) -> None:
    if x.ndim != 4:
        raise ValueError(f"{who} expects a 4-D image tensor, got shape {x.shape}")
    b, c, h, w = x.shape
    if c != channels:
        raise ValueError(f"{who} expects {channels} channels, got {c}")
    if h < multiple or w < multiple or h % multiple or w % multiple:
        raise ValueError(
            f"{who} requires spatial extents that are multiples of {multiple} "
            f"(and at least {multiple}), got {h}x{w}")


# ---------------------------------------------------------------------------
# builders


def _build_cells(role: str, n: int, hidden_dim: int, image_channels: int,
                 rng: np.random.Generator, chosen=None) -> list[Cell]:
    cells = []
    plan = layer_plan(role, n, hidden_dim, image_channels)
    for ci, (ctype, slots_plan) in enumerate(plan):
        slots = []
        for si, (cin, cout, action) in enumerate(slots_plan):
            name = f"cell{ci}.slot{si + 1}"
            tail = _slot_tail(role, ci, si, len(plan))
            if chosen is None:
                slots.append(MixedSlot(name, ctype, cin, cout, action, rng, **tail))
            else:
                slots.append(FixedSlot(name, chosen[ci][si], cin, cout, action, rng, **tail))
        cells.append(Cell(ctype, slots))
    return cells


def build_generator_supernet(n_cells: int, h_search: int, image_channels: int = 3,
                             seed: int = 0) -> GeneratorNet:
    """Supernet generator: (encoding, residual x (N-2), decoding) cells with
    every candidate live and alpha initialized to the uniform mixture."""
    if n_cells < 3:
        raise ValueError(f"generator requires N >= 3, got {n_cells}")
    if h_search < 2:
        raise ValueError(f"h_search must be >= 2, got {h_search}")
    rng = rng_for(seed, "init", "generator")
    cells = _build_cells(GENERATOR, n_cells, h_search, image_channels, rng)
    return GeneratorNet("supernet", cells, h_search, image_channels)


def build_discriminator_supernet(h_search: int, image_channels: int = 3,
                                 seed: int = 0) -> DiscriminatorNet:
    if h_search < 2:
        raise ValueError(f"h_search must be >= 2, got {h_search}")
    rng = rng_for(seed, "init", "discriminator")
    cells = _build_cells(DISCRIMINATOR, 2, h_search, image_channels, rng)
    head_w = Tensor(rng.normal(0.0, WEIGHT_INIT_STD, (1, h_search, 1, 1)), requires_grad=True)
    head_b = Tensor(np.zeros(1), requires_grad=True)
    return DiscriminatorNet("supernet", cells, head_w, head_b, h_search, image_channels)


def instantiate_discrete(spec: ArchitectureSpec, hidden_dim: int, seed: int = 0,
                         image_channels: int = 3):
    """Fresh discrete network from a spec, with the hidden dimension restored to
    ``hidden_dim`` (weights are re-initialized, not inherited)."""
    if hidden_dim < 1:
        raise ValueError(f"hidden_dim must be positive, got {hidden_dim}")
    chosen = [(c.op1, c.op2) for c in spec.cells]
    rng = rng_for(seed, "init", "discrete", spec.role)
    cells = _build_cells(spec.role, spec.n, hidden_dim, image_channels, rng, chosen=chosen)
    if spec.role == GENERATOR:
        return GeneratorNet("discrete", cells, hidden_dim, image_channels)
    head_w = Tensor(rng.normal(0.0, WEIGHT_INIT_STD, (1, hidden_dim, 1, 1)), requires_grad=True)
    head_b = Tensor(np.zeros(1), requires_grad=True)
    return DiscriminatorNet("discrete", cells, head_w, head_b, hidden_dim, image_channels)


@dataclass
class SupernetPair:
    """The four searchable networks with their shared training state."""

    g_a: GeneratorNet
    g_b: GeneratorNet
    d_a: DiscriminatorNet
    d_b: DiscriminatorNet

    @classmethod
    def build(cls, n_cells: int, h_search: int, image_channels: int = 3,
              seed: int = 0) -> "SupernetPair":
        return cls(
            g_a=build_generator_supernet(n_cells, h_search, image_channels, seed=_sub(seed, "g_a")),
            g_b=build_generator_supernet(n_cells, h_search, image_channels, seed=_sub(seed, "g_b")),
            d_a=build_discriminator_supernet(h_search, image_channels, seed=_sub(seed, "d_a")),
            d_b=build_discriminator_supernet(h_search, image_channels, seed=_sub(seed, "d_b")),
        )

    def nets(self) -> dict[str, object]:
        return {"g_a": self.g_a, "g_b": self.g_b, "d_a": self.d_a, "d_b": self.d_b}

    def weights(self, roles: tuple[str, ...]) -> dict[str, Tensor]:
        out = {}
        for role in roles:
            for name, p in self.nets()[role].parameters().items():
                out[f"{role}.{name}"] = p
        return out

    def alphas(self, roles: tuple[str, ...]) -> dict[str, Tensor]:
        out = {}
        for role in roles:
            for name, p in self.nets()[role].alphas().items():
                out[f"{role}.{name}"] = p
        return out


def _sub(seed: int, label: str) -> int:
    # derive a child seed so each network sees an independent init stream
    return int(rng_for(seed, "net-seed", label).integers(0, 2 ** 63 - 1))


# ---------------------------------------------------------------------------
# fixed reference generator (stem, 2 down, residual trunk, 2 up, output conv)


class BaselineGenerator:
    def __init__(self, hidden_dim: int, image_channels: int = 3, seed: int = 0,
                 n_res: int = 9):
        if hidden_dim < 2:
            raise ValueError(f"hidden_dim must be >= 2, got {hidden_dim}")
        self.role = GENERATOR
        self.mode = "baseline"
        self.hidden_dim = hidden_dim
        self.image_channels = image_channels
        self.n_res = n_res
        rng = rng_for(seed, "init", "baseline")
        h, c = hidden_dim, image_channels
        self.params: dict[str, Tensor] = {}

        def conv(name, cin, cout, k, bias=True):
            self.params[f"{name}.weight"] = Tensor(rng.normal(0.0, WEIGHT_INIT_STD, (cout, cin, k, k)),
                                                   requires_grad=True)
            if bias:
                self.params[f"{name}.bias"] = Tensor(np.zeros(cout), requires_grad=True)

        def transconv(name, cin, cout):
            self.params[f"{name}.weight"] = Tensor(rng.normal(0.0, WEIGHT_INIT_STD, (cin, cout, 3, 3)),
                                                   requires_grad=True)

        conv("stem", c, h, 7)
        conv("down1", h, 2 * h, 3)
        conv("down2", 2 * h, 4 * h, 3)
        for i in range(n_res):
            conv(f"res{i}.conv1", 4 * h, 4 * h, 3)
            conv(f"res{i}.conv2", 4 * h, 4 * h, 3)
        transconv("up1", 4 * h, 2 * h)
        transconv("up2", 2 * h, h)
        conv("final", h, c, 7)

    def _block(self, x, name, *, stride=1, padding, relu=True):
        y = ad.conv2d(x, self.params[f"{name}.weight"], self.params[f"{name}.bias"],
                      stride=stride, padding=padding)
        y = ad.instance_norm2d(y)
        return ad.relu(y) if relu else y

    def forward(self, x: Tensor, differentiable_alpha: bool = True) -> Tensor:
        _check_image(x, self.image_channels, multiple=4, who="generator")
        y = self._block(x, "stem", padding=3)
        y = self._block(y, "down1", stride=2, padding=1)
        y = self._block(y, "down2", stride=2, padding=1)
        for i in range(self.n_res):
            body = self._block(y, f"res{i}.conv1", padding=1)
            body = self._block(body, f"res{i}.conv2", padding=1, relu=False)
            y = ad.add(y, body)
        for name in ("up1", "up2"):
            y = ad.conv_transpose2d(y, self.params[f"{name}.weight"], stride=2,
                                    padding=1, output_padding=1)
            y = ad.relu(ad.instance_norm2d(y))
        y = ad.conv2d(y, self.params["final.weight"], self.params["final.bias"], padding=3)
        return ad.tanh(y)

    __call__ = forward

    def parameters(self) -> dict[str, Tensor]:
        return dict(self.params)

    def alphas(self) -> dict[str, Tensor]:
        return {}


def build_baseline_generator(hidden_dim: int, image_channels: int = 3,
                             seed: int = 0, n_res: int = 9) -> BaselineGenerator:
    return BaselineGenerator(hidden_dim, image_channels, seed, n_res)


def baseline_param_count(hidden_dim: int, image_channels: int = 3, n_res: int = 9) -> int:
    h, c = hidden_dim, image_channels
    total = 49 * c * h + h            # stem
    total += 9 * h * 2 * h + 2 * h    # down1
    total += 9 * 2 * h * 4 * h + 4 * h
    total += n_res * 2 * (9 * 16 * h * h + 4 * h)
    total += 9 * 4 * h * 2 * h        # up1 (transposed, no bias)
    total += 9 * 2 * h * h            # up2
    total += 49 * h * c + c           # final
    return total


# ---------------------------------------------------------------------------
# size accounting


@dataclass
class SizeReport:
    param_count: int
    bytes: int
    breakdown: dict[str, int]

    @property
    def megabytes(self) -> float:
        return self.bytes / 1e6


def spec_param_count(spec: ArchitectureSpec, hidden_dim: int,
                     image_channels: int = 3) -> tuple[int, dict[str, int]]:
    """Closed-form parameter count of a discrete spec at a given hidden dim."""
    plan = layer_plan(spec.role, spec.n, hidden_dim, image_channels)
    breakdown: dict[str, int] = {}
    total = 0
    for ci, ((_, slots_plan), cell) in enumerate(zip(plan, spec.cells)):
        count = 0
        for (cin, cout, _), kind in zip(slots_plan, (cell.op1, cell.op2)):
            count += candidate_param_count(kind, cin, cout)
        breakdown[f"cell{ci}"] = count
        total += count
    if spec.role == DISCRIMINATOR:
        head = hidden_dim + 1
        breakdown["head"] = head
        total += head
    return total, breakdown


def model_size(net_or_spec, hidden_dim: int | None = None,
               image_channels: int = 3) -> SizeReport:
    """Exact parameter count and byte size for a network or a (spec, H) pair.

    Architecture weights of supernets are not model parameters and are not
    counted.
    """
    if isinstance(net_or_spec, ArchitectureSpec):
        if hidden_dim is None:
            hidden_dim = net_or_spec.hidden_dim
        total, breakdown = spec_param_count(net_or_spec, hidden_dim, image_channels)
    else:
        params = net_or_spec.parameters()
        if not params:
            raise ValueError("model_size: network has no parameters")
        breakdown = {}
        for name, p in params.items():
            top = name.split(".")[0]
            breakdown[top] = breakdown.get(top, 0) + p.size
        total = sum(breakdown.values())
    if total <= 0:
        raise ValueError("model_size: degenerate zero-parameter model")
    return SizeReport(param_count=total, bytes=BYTES_PER_PARAM * total, breakdown=breakdown)


def scale_hidden_to_target(spec_or_sizefn, target_bytes: int) -> int:
    """Find the integer hidden dimension whose size is closest to the target.

    The size function is strictly increasing in H, so a doubling search plus
    bisection suffices.  Ties go to the smaller H.
    """
    if isinstance(spec_or_sizefn, ArchitectureSpec):
        spec = spec_or_sizefn

        def size_fn(h: int) -> int:
            return model_size(spec, h).bytes
    else:
        size_fn = spec_or_sizefn

    if target_bytes < size_fn(1):
        raise ValueError(
            f"target {target_bytes} bytes is below the minimum model size {size_fn(1)}")
    hi = 1
    while size_fn(hi) < target_bytes:
        hi *= 2
        if hi > 1 << 20:
            raise ValueError("target size unreachably large")
    lo = hi // 2 if hi > 1 else 1
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if size_fn(mid) < target_bytes:
            lo = mid
        else:
            hi = mid
    # hi is the smallest H with size >= target; compare against hi - 1
    if hi == 1:
        return 1
    below, above = size_fn(hi - 1), size_fn(hi)
    if target_bytes - below <= above - target_bytes:
        return hi - 1
    return hi


# ---------------------------------------------------------------------------
# weight checkpoints
#
# Layout: magic line b"NASW1\n", one JSON line {"params": [{"name", "shape"}...]}
# listing parameters in sorted-name order, b"\n", then the raw little-endian
# float64 payloads concatenated in the same order.

_CKPT_MAGIC = b"NASW1\n"


def save_weights(path, named: dict[str, Tensor]) -> None:
    names = sorted(named)
    header = json.dumps(
        {"params": [{"name": n, "shape": list(named[n].shape)} for n in names]},
        separators=(",", ":"))
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(header.encode("utf-8"))
        fh.write(b"\n")
        for n in names:
            fh.write(np.ascontiguousarray(named[n].data, dtype="<f8").tobytes())


def load_weights(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(len(_CKPT_MAGIC))
        if magic != _CKPT_MAGIC:
            raise ValueError(f"{path}: not a weight checkpoint (bad magic)")
        header = json.loads(fh.readline().decode("utf-8"))
        out = {}
        for entry in header["params"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise ValueError(f"{path}: truncated payload for '{entry['name']}'")
            out[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
    return out


def assign_weights(net, arrays: dict[str, np.ndarray], prefix: str = "") -> None:
    for name, p in net.parameters().items():
        key = prefix + name
        if key not in arrays:
            raise ValueError(f"checkpoint is missing parameter '{key}'")
        if arrays[key].shape != p.data.shape:
            raise ValueError(
                f"checkpoint parameter '{key}' has shape {arrays[key].shape}, "
                f"expected {p.data.shape}")
        p.data = arrays[key].copy()
