"""Dense float64 tensors with reverse-mode automatic differentiation.

The operation set is exactly what the searchable translation networks need:
strided/dilated convolution, transposed convolution, pooling, upsampling,
instance normalization, pointwise nonlinearities, elementwise arithmetic,
softmax and mean reduction.  Graphs are recorded eagerly; ``backward`` walks
them once in reverse topological order and accumulates gradients into
``Tensor.grad``.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Tensor",
    "no_grad",
    "conv2d",
    "conv_transpose2d",
    "pool2d",
    "interpolate2d",
    "instance_norm2d",
    "relu",
    "leaky_relu",
    "tanh",
    "sigmoid",
    "log",
    "absolute",
    "negate",
    "pointwise",
    "add",
    "sub",
    "mul",
    "combine",
    "scale",
    "reduce_mean",
    "softmax",
    "clamp",
    "index",
    "check_gradients",
    "GradCheckReport",
]

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (forward values only)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """An n-dimensional float64 array that can participate in a gradient graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._backward_fn = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() requires a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """A graph-free view of the same values."""
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Accumulate d(self)/d(t) into ``t.grad`` for every tracked tensor t.

        Repeated calls without zeroing add up, so callers reset gradients once
        per optimization step.
        """
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise ValueError("backward() called on a tensor that tracks no gradients")

        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))

        # Gradients accumulate in a private map during the sweep; each node's
        # final value is then folded into .grad so repeated backward calls add.
        pending: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node.grad is None:
                node.grad = g
            else:
                node.grad = node.grad + g
            if node._backward_fn is None:
                continue
            for parent, pg in node._backward_fn(g):
                if not parent.requires_grad:
                    continue
                key = id(parent)
                if key in pending:
                    pending[key] += pg
                else:
                    pending[key] = np.array(pg, dtype=np.float64)

    # operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return negate(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _node(data: np.ndarray, parents: tuple, backward_fn) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward_fn = backward_fn
    return out


# ---------------------------------------------------------------------------
# convolution family


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, dilation: int,
            ho: int, wo: int) -> np.ndarray:
    b, c = xp.shape[:2]
    cols = np.empty((b, c, kh, kw, ho, wo), dtype=np.float64)
    for i in range(kh):
        hi = i * dilation
        for j in range(kw):
            wj = j * dilation
            cols[:, :, i, j] = xp[:, :, hi:hi + stride * ho:stride, wj:wj + stride * wo:stride]
    return cols.reshape(b, c * kh * kw, ho * wo)


def _col2im(cols: np.ndarray, xp_shape: tuple, kh: int, kw: int, stride: int,
            dilation: int, ho: int, wo: int) -> np.ndarray:
    b, c = xp_shape[:2]
    out = np.zeros(xp_shape, dtype=np.float64)
    cols = cols.reshape(b, c, kh, kw, ho, wo)
    for i in range(kh):
        hi = i * dilation
        for j in range(kw):
            wj = j * dilation
            out[:, :, hi:hi + stride * ho:stride, wj:wj + stride * wo:stride] += cols[:, :, i, j]
    return out


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, *,
           stride: int = 1, padding: int = 0, dilation: int = 1) -> Tensor:
    """2-D convolution with zero padding, square kernels, optional dilation."""
    x, weight = _as_tensor(x), _as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"conv2d expects 4-D input and weight, got {x.shape} and {weight.shape}")
    if stride < 1 or dilation < 1:
        raise ValueError(f"conv2d: stride and dilation must be >= 1, got {stride}, {dilation}")
    b, cin, h, w = x.shape
    cout, cw, kh, kw = weight.shape
    if cw != cin:
        raise ValueError(f"conv2d: input has {cin} channels but weight expects {cw}")
    if bias is not None:
        bias = _as_tensor(bias)
        if bias.shape != (cout,):
            raise ValueError(f"conv2d: bias shape {bias.shape} does not match {cout} output channels")
    keh = dilation * (kh - 1) + 1
    kew = dilation * (kw - 1) + 1
    if h + 2 * padding < keh or w + 2 * padding < kew:
        raise ValueError(
            f"conv2d: padded input {h + 2 * padding}x{w + 2 * padding} smaller than "
            f"effective kernel {keh}x{kew}")
    ho = (h + 2 * padding - keh) // stride + 1
    wo = (w + 2 * padding - kew) // stride + 1

    if padding:
        xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    else:
        xp = x.data
    cols = _im2col(xp, kh, kw, stride, dilation, ho, wo)
    w2 = weight.data.reshape(cout, -1)
    out = np.matmul(w2, cols).reshape(b, cout, ho, wo)
    if bias is not None:
        out = out + bias.data.reshape(1, -1, 1, 1)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward_fn(g):
        g2 = g.reshape(b, cout, -1)
        grads = []
        if x.requires_grad:
            gcols = np.matmul(w2.T, g2)
            gxp = _col2im(gcols, xp.shape, kh, kw, stride, dilation, ho, wo)
            gx = gxp[:, :, padding:padding + h, padding:padding + w] if padding else gxp
            grads.append((x, gx))
        if weight.requires_grad:
            gw = np.einsum("bol,bkl->ok", g2, cols).reshape(weight.shape)
            grads.append((weight, gw))
        if bias is not None and bias.requires_grad:
            grads.append((bias, g.sum(axis=(0, 2, 3))))
        return grads

    return _node(out, parents, backward_fn)


def conv_transpose2d(x: Tensor, weight: Tensor, *, stride: int = 1,
                     padding: int = 0, output_padding: int = 0) -> Tensor:
    """Transposed 2-D convolution; the exact adjoint of ``conv2d``.

    ``weight`` has layout (in_channels, out_channels, k, k).
    """
    x, weight = _as_tensor(x), _as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"conv_transpose2d expects 4-D input and weight, got {x.shape} and {weight.shape}")
    if stride < 1:
        raise ValueError(f"conv_transpose2d: stride must be >= 1, got {stride}")
    if not 0 <= output_padding < stride:
        raise ValueError(
            f"conv_transpose2d: output_padding must satisfy 0 <= p < stride, "
            f"got {output_padding} with stride {stride}")
    b, cin, h, w = x.shape
    cw, cout, kh, kw = weight.shape
    if cw != cin:
        raise ValueError(f"conv_transpose2d: input has {cin} channels but weight expects {cw}")
    ho = (h - 1) * stride - 2 * padding + kh + output_padding
    wo = (w - 1) * stride - 2 * padding + kw + output_padding
    if ho < 1 or wo < 1:
        raise ValueError(f"conv_transpose2d: parameters give empty output {ho}x{wo}")

    # Scatter onto the full (unpadded) canvas, then crop `padding` from each
    # side; rows introduced by output_padding beyond the canvas are zeros.
    hc = max((h - 1) * stride + kh, padding + ho)
    wc = max((w - 1) * stride + kw, padding + wo)
    w2 = weight.data.reshape(cin, cout * kh * kw)
    x2 = x.data.reshape(b, cin, h * w)
    cols = np.matmul(w2.T, x2)
    canvas = _col2im(cols, (b, cout, hc, wc), kh, kw, stride, 1, h, w)
    out = canvas[:, :, padding:padding + ho, padding:padding + wo]

    def backward_fn(g):
        gcan = np.zeros((b, cout, hc, wc), dtype=np.float64)
        gcan[:, :, padding:padding + ho, padding:padding + wo] = g
        gcols = _im2col(gcan, kh, kw, stride, 1, h, w)
        grads = []
        if x.requires_grad:
            grads.append((x, np.matmul(w2, gcols).reshape(b, cin, h, w)))
        if weight.requires_grad:
            gw = np.einsum("bcl,bkl->ck", x2, gcols).reshape(weight.shape)
            grads.append((weight, gw))
        return grads

    return _node(np.ascontiguousarray(out), (x, weight), backward_fn)


def pool2d(x: Tensor, mode: str, window: int, stride: int) -> Tensor:
    """Max or average pooling. Max routes gradient to the first maximum of a window."""
    x = _as_tensor(x)
    if mode not in ("max", "avg"):
        raise ValueError(f"pool2d: unknown mode '{mode}'")
    if x.ndim != 4:
        raise ValueError(f"pool2d expects 4-D input, got {x.shape}")
    if window < 1 or stride < 1:
        raise ValueError(f"pool2d: window and stride must be >= 1, got {window}, {stride}")
    b, c, h, w = x.shape
    if window > h or window > w:
        raise ValueError(f"pool2d: window {window} exceeds spatial extent {h}x{w}")
    ho = (h - window) // stride + 1
    wo = (w - window) // stride + 1
    patches = _im2col(x.data, window, window, stride, 1, ho, wo)
    patches = patches.reshape(b, c, window * window, ho * wo)

    if mode == "max":
        idx = np.argmax(patches, axis=2)
        out = np.take_along_axis(patches, idx[:, :, None, :], axis=2)[:, :, 0, :]
    else:
        out = patches.mean(axis=2)
    out = out.reshape(b, c, ho, wo)

    def backward_fn(g):
        if not x.requires_grad:
            return []
        g2 = g.reshape(b, c, -1)
        gpatch = np.zeros((b, c, window * window, ho * wo), dtype=np.float64)
        if mode == "max":
            np.put_along_axis(gpatch, idx[:, :, None, :], g2[:, :, None, :], axis=2)
        else:
            gpatch[:] = g2[:, :, None, :] / (window * window)
        gcols = gpatch.reshape(b, c * window * window, ho * wo)
        return [(x, _col2im(gcols, x.shape, window, window, stride, 1, ho, wo))]

    return _node(out, (x,), backward_fn)


_interp_matrices: dict[tuple, np.ndarray] = {}


def _interp_matrix(n: int, factor: int, mode: str) -> np.ndarray:
    key = (n, factor, mode)
    cached = _interp_matrices.get(key)
    if cached is not None:
        return cached
    m = np.zeros((n * factor, n), dtype=np.float64)
    if mode == "nearest":
        for i in range(n * factor):
            m[i, i // factor] = 1.0
    else:  # bilinear, half-pixel centers, clamped to the border
        for i in range(n * factor):
            src = (i + 0.5) / factor - 0.5
            src = min(max(src, 0.0), n - 1.0)
            i0 = int(np.floor(src))
            i1 = min(i0 + 1, n - 1)
            t = src - i0
            m[i, i0] += 1.0 - t
            m[i, i1] += t
    _interp_matrices[key] = m
    return m


def interpolate2d(x: Tensor, factor: int, mode: str) -> Tensor:
    """Upsample both spatial axes by an integer factor (nearest or bilinear)."""
    x = _as_tensor(x)
    if mode not in ("nearest", "bilinear"):
        raise ValueError(f"interpolate2d: unknown mode '{mode}'")
    if x.ndim != 4:
        raise ValueError(f"interpolate2d expects 4-D input, got {x.shape}")
    if int(factor) != factor or factor < 1:
        raise ValueError(f"interpolate2d: factor must be a positive integer, got {factor}")
    factor = int(factor)
    _, _, h, w = x.shape
    rh = _interp_matrix(h, factor, mode)
    rw = _interp_matrix(w, factor, mode)
    out = np.einsum("ih,bchw,jw->bcij", rh, x.data, rw, optimize=True)

    def backward_fn(g):
        if not x.requires_grad:
            return []
        return [(x, np.einsum("ih,bcij,jw->bchw", rh, g, rw, optimize=True))]

    return _node(out, (x,), backward_fn)


def instance_norm2d(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each (batch, channel) plane to zero mean, unit variance (population)."""
    x = _as_tensor(x)
    if x.ndim != 4:
        raise ValueError(f"instance_norm2d expects 4-D input, got {x.shape}")
    if eps <= 0:
        raise ValueError(f"instance_norm2d: eps must be positive, got {eps}")
    mu = x.data.mean(axis=(2, 3), keepdims=True)
    var = x.data.var(axis=(2, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv

    def backward_fn(g):
        if not x.requires_grad:
            return []
        gm = g.mean(axis=(2, 3), keepdims=True)
        gs = (g * xhat).mean(axis=(2, 3), keepdims=True)
        return [(x, inv * (g - gm - xhat * gs))]

    return _node(xhat.copy(), (x,), backward_fn)


# ---------------------------------------------------------------------------
# pointwise ops


def _pointwise(x: Tensor, fwd, dfdx) -> Tensor:
    x = _as_tensor(x)
    out = fwd(x.data)

    def backward_fn(g):
        if not x.requires_grad:
            return []
        return [(x, g * dfdx(x.data, out))]

    return _node(out, (x,), backward_fn)


def relu(x: Tensor) -> Tensor:
    return _pointwise(x, lambda d: np.maximum(d, 0.0), lambda d, o: (d > 0).astype(np.float64))


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    return _pointwise(x, lambda d: np.where(d > 0, d, slope * d),
                      lambda d, o: np.where(d > 0, 1.0, slope))


def tanh(x: Tensor) -> Tensor:
    return _pointwise(x, np.tanh, lambda d, o: 1.0 - o * o)


def _sigmoid_values(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(x: Tensor) -> Tensor:
    return _pointwise(x, _sigmoid_values, lambda d, o: o * (1.0 - o))


def log(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    if np.any(x.data <= 0):
        raise ValueError("log requires strictly positive inputs; clamp before taking logs")
    return _pointwise(x, np.log, lambda d, o: 1.0 / d)


def absolute(x: Tensor) -> Tensor:
    # subgradient 0 at the origin
    return _pointwise(x, np.abs, lambda d, o: np.sign(d))


def negate(x: Tensor) -> Tensor:
    return _pointwise(x, np.negative, lambda d, o: np.full_like(d, -1.0))


_POINTWISE = {
    "relu": relu,
    "leaky_relu": leaky_relu,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "log": log,
    "abs": absolute,
    "negate": negate,
}


def pointwise(x: Tensor, kind: str) -> Tensor:
    try:
        fn = _POINTWISE[kind]
    except KeyError:
        raise ValueError(f"pointwise: unknown kind '{kind}'") from None
    return fn(x)


# ---------------------------------------------------------------------------
# arithmetic


def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape("add", a, b)

    def backward_fn(g):
        return [(a, g), (b, g)]

    return _node(a.data + b.data, (a, b), backward_fn)


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape("sub", a, b)

    def backward_fn(g):
        return [(a, g), (b, -g)]

    return _node(a.data - b.data, (a, b), backward_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; one operand may be a single-element scalar."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise ValueError(f"mul: shape mismatch {a.shape} vs {b.shape} (only scalar broadcast allowed)")

    def backward_fn(g):
        grads = []
        if a.requires_grad:
            ga = g * b.data
            if a.size == 1 and ga.shape != a.shape:
                ga = ga.sum().reshape(a.shape)
            grads.append((a, ga))
        if b.requires_grad:
            gb = g * a.data
            if b.size == 1 and gb.shape != b.shape:
                gb = gb.sum().reshape(b.shape)
            grads.append((b, gb))
        return grads

    return _node(a.data * b.data, (a, b), backward_fn)


_COMBINE = {"add": add, "sub": sub, "mul": mul}


def combine(a: Tensor, b: Tensor, op: str) -> Tensor:
    try:
        fn = _COMBINE[op]
    except KeyError:
        raise ValueError(f"combine: unknown op '{op}'") from None
    return fn(a, b)


def scale(a: Tensor, s: float) -> Tensor:
    a = _as_tensor(a)
    s = float(s)

    def backward_fn(g):
        return [(a, g * s)]

    return _node(a.data * s, (a,), backward_fn)


def reduce_mean(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    n = a.size

    def backward_fn(g):
        return [(a, np.full(a.shape, float(g) / n))]

    return _node(np.asarray(a.data.mean()), (a,), backward_fn)


def softmax(v: Tensor) -> Tensor:
    """Softmax of a 1-D vector, computed with max subtraction for stability."""
    v = _as_tensor(v)
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"softmax expects a non-empty 1-D vector, got shape {v.shape}")
    shifted = v.data - v.data.max()
    e = np.exp(shifted)
    y = e / e.sum()

    def backward_fn(g):
        if not v.requires_grad:
            return []
        return [(v, y * (g - np.dot(g, y)))]

    return _node(y, (v,), backward_fn)


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clip values to [lo, hi]; gradient passes only strictly inside the range."""
    x = _as_tensor(x)
    if lo >= hi:
        raise ValueError(f"clamp: empty range [{lo}, {hi}]")
    inside = (x.data > lo) & (x.data < hi)

    def backward_fn(g):
        if not x.requires_grad:
            return []
        return [(x, g * inside)]

    return _node(np.clip(x.data, lo, hi), (x,), backward_fn)


def index(v: Tensor, i: int) -> Tensor:
    """Pick one entry of a 1-D vector as a scalar tensor."""
    v = _as_tensor(v)
    if v.ndim != 1:
        raise ValueError(f"index expects a 1-D vector, got shape {v.shape}")
    i = int(i)
    if not 0 <= i < v.size:
        raise ValueError(f"index {i} out of range for length {v.size}")

    def backward_fn(g):
        if not v.requires_grad:
            return []
        gv = np.zeros(v.shape, dtype=np.float64)
        gv[i] = float(g)
        return [(v, gv)]

    return _node(np.asarray(v.data[i]), (v,), backward_fn)


# ---------------------------------------------------------------------------
# finite-difference gradient checking


@dataclass
class GradCheckEntry:
    """Result for one checked input tensor."""

    index: int
    max_rel_error: float
    excluded: list[tuple] = field(default_factory=list)
    ok: bool = True


@dataclass
class GradCheckReport:
    tol: float
    h: float
    entries: list[GradCheckEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.ok for e in self.entries)

    @property
    def max_rel_error(self) -> float:
        return max((e.max_rel_error for e in self.entries), default=0.0)


def check_gradients(op_graph, inputs: list[Tensor], h: float = 1e-5,
                    tol: float = 1e-4, kink_tol: float = 1e-3) -> GradCheckReport:
    """Compare backward() gradients against central finite differences.

    ``op_graph`` maps the given input tensors to a scalar tensor.  Coordinates
    where the two one-sided slopes disagree (kinks of relu/abs/max) are flagged
    and excluded rather than failed.
    """
    for t in inputs:
        t.requires_grad = True
        t.grad = None
    loss = op_graph(inputs)
    if loss.size != 1:
        raise ValueError("check_gradients: op_graph must produce a scalar")
    loss.backward()
    analytic = [np.zeros(t.shape) if t.grad is None else t.grad.copy() for t in inputs]

    report = GradCheckReport(tol=tol, h=h)
    with no_grad():
        f0 = float(op_graph(inputs).data)
        for ti, t in enumerate(inputs):
            flat = t.data.reshape(-1)
            ana = analytic[ti].reshape(-1)
            entry = GradCheckEntry(index=ti, max_rel_error=0.0)
            for ci in range(flat.size):
                orig = flat[ci]
                flat[ci] = orig + h
                fp = float(op_graph(inputs).data)
                flat[ci] = orig - h
                fm = float(op_graph(inputs).data)
                flat[ci] = orig
                s_plus = (fp - f0) / h
                s_minus = (f0 - fm) / h
                if abs(s_plus - s_minus) > kink_tol * max(1.0, abs(s_plus), abs(s_minus)):
                    entry.excluded.append(np.unravel_index(ci, t.shape))
                    continue
                num = (fp - fm) / (2.0 * h)
                err = abs(ana[ci] - num) / max(1.0, abs(ana[ci]), abs(num))
                entry.max_rel_error = max(entry.max_rel_error, err)
            entry.ok = entry.max_rel_error <= tol
            report.entries.append(entry)
    return report
