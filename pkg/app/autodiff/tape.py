"""
Reverse-mode дифференцирование над плотными массивами

Every primitive computes its forward value immediately and records, per
input, a vector-Jacobian product closure. backward() replays the records in
reverse order and accumulates gradients into the leaves.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.errors import InvalidInputError

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, int, Sequence[float]]
Vjp = Callable[[np.ndarray], np.ndarray]


@dataclass
class _Record:
    """One operation: output slot plus (input slot, vjp) pairs"""
    output: int
    inputs: List[Tuple[int, Vjp]] = field(default_factory=list)
    op: str = 'leaf'


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sums a broadcast gradient back to the input shape"""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tape:
    """Ordered operation log of a single computation"""

    def __init__(self):
        self._records: List[_Record] = []
        self._values: List['DualValue'] = []

    def __len__(self):
        return len(self._records)

    def leaf(self, value: ArrayLike) -> 'DualValue':
        """Differentiable input"""
        return self._push(np.array(value, dtype=np.float64), 'leaf', [])

    def constant(self, value: ArrayLike) -> 'DualValue':
        return self._push(np.array(value, dtype=np.float64), 'const', [])

    def lift(self, value: Union['DualValue', ArrayLike]) -> 'DualValue':
        if isinstance(value, DualValue):
            self._check(value)
            return value
        return self.constant(value)

    def record(self, op: str, value: np.ndarray,
               inputs: Sequence[Tuple['DualValue', Vjp]]) -> 'DualValue':
        """Registers a primitive; all inputs must live on this tape"""
        for dv, _ in inputs:
            self._check(dv)
        links = [(dv.index, vjp) for dv, vjp in inputs if dv.requires_grad]
        return self._push(np.asarray(value, dtype=np.float64), op, links)

    def _push(self, value: np.ndarray, op: str, links: List[Tuple[int, Vjp]]) -> 'DualValue':
        index = len(self._records)
        requires_grad = op == 'leaf' or bool(links)
        dv = DualValue(value, self, index, requires_grad)
        self._records.append(_Record(index, links, op))
        self._values.append(dv)
        return dv

    def _check(self, dv: 'DualValue'):
        if dv.tape is not self:
            raise InvalidInputError("operands live on different tapes")

    def backward(self, root: 'DualValue') -> Dict[int, np.ndarray]:
        """Reverse accumulation from a scalar root; fills .grad of every leaf"""
        self._check(root)
        if root.value.size != 1:
            raise InvalidInputError(f"backward needs a scalar root, got shape {root.value.shape}")
        grads: List[Optional[np.ndarray]] = [None] * len(self._records)
        grads[root.index] = np.ones_like(root.value)
        for rec in reversed(self._records[:root.index + 1]):
            g = grads[rec.output]
            if g is None:
                continue
            for src, vjp in rec.inputs:
                contribution = vjp(g)
                grads[src] = contribution if grads[src] is None else grads[src] + contribution
        leaf_grads = {}
        for rec in self._records:
            if rec.op != 'leaf':
                continue
            dv = self._values[rec.output]
            g = grads[rec.output]
            dv.grad = np.zeros_like(dv.value) if g is None else np.array(g, dtype=np.float64).reshape(dv.value.shape)
            leaf_grads[rec.output] = dv.grad
        return leaf_grads

    def clear(self):
        """Drops all records; DualValues created so far become unusable"""
        for dv in self._values:
            dv.tape = None
        self._records.clear()
        self._values.clear()


class DualValue:
    """Value plus a handle into the tape that produced it"""

    __array_priority__ = 100

    def __init__(self, value: np.ndarray, tape: Tape, index: int, requires_grad: bool):
        self.value = value
        self.tape = tape
        self.index = index
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None

    def __repr__(self):
        return f"DualValue(shape={self.value.shape}, index={self.index})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def item(self) -> float:
        return float(self.value.reshape(-1)[0]) if self.value.size == 1 else float('nan')

    def __float__(self):
        return self.item()

    def backward(self) -> Dict[int, np.ndarray]:
        if self.tape is None:
            raise InvalidInputError("tape was cleared")
        return self.tape.backward(self)

    # Операторы
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims: bool = False):
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)


def _tape_of(*operands) -> Tape:
    tapes = {id(op.tape): op.tape for op in operands if isinstance(op, DualValue)}
    if not tapes:
        raise InvalidInputError("at least one operand must be a DualValue")
    if len(tapes) > 1 or None in tapes.values():
        raise InvalidInputError("operands live on different tapes")
    return next(iter(tapes.values()))


def _lift2(a, b) -> Tuple[Tape, DualValue, DualValue]:
    tape = _tape_of(a, b)
    return tape, tape.lift(a), tape.lift(b)


# --- примитивы ---

def add(a, b) -> DualValue:
    tape, a, b = _lift2(a, b)
    out = a.value + b.value
    return tape.record('add', out, [
        (a, lambda g, s=a.shape: _unbroadcast(g, s)),
        (b, lambda g, s=b.shape: _unbroadcast(g, s)),
    ])


def sub(a, b) -> DualValue:
    tape, a, b = _lift2(a, b)
    out = a.value - b.value
    return tape.record('sub', out, [
        (a, lambda g, s=a.shape: _unbroadcast(g, s)),
        (b, lambda g, s=b.shape: _unbroadcast(-g, s)),
    ])


def mul(a, b) -> DualValue:
    tape, a, b = _lift2(a, b)
    av, bv = a.value, b.value
    return tape.record('mul', av * bv, [
        (a, lambda g: _unbroadcast(g * bv, av.shape)),
        (b, lambda g: _unbroadcast(g * av, bv.shape)),
    ])


def div(a, b) -> DualValue:
    tape, a, b = _lift2(a, b)
    av, bv = a.value, b.value
    out = av / bv
    return tape.record('div', out, [
        (a, lambda g: _unbroadcast(g / bv, av.shape)),
        (b, lambda g: _unbroadcast(-g * out / bv, bv.shape)),
    ])


def neg(a: DualValue) -> DualValue:
    return a.tape.record('neg', -a.value, [(a, lambda g: -g)])


def exp(a: DualValue) -> DualValue:
    out = np.exp(a.value)
    return a.tape.record('exp', out, [(a, lambda g: g * out)])


def log(a: DualValue) -> DualValue:
    av = a.value
    return a.tape.record('log', np.log(av), [(a, lambda g: g / av)])


def softplus(a: DualValue) -> DualValue:
    """log(1 + exp(x)), устойчиво для больших |x|"""
    av = a.value
    sig = 0.5 * (1.0 + np.tanh(0.5 * av))
    return a.tape.record('softplus', np.logaddexp(0.0, av), [(a, lambda g: g * sig)])


def absolute(a: DualValue) -> DualValue:
    """|x| with subgradient 0 at x = 0"""
    av = a.value
    return a.tape.record('abs', np.abs(av), [(a, lambda g: g * np.sign(av))])


def square(a: DualValue) -> DualValue:
    av = a.value
    return a.tape.record('square', av * av, [(a, lambda g: 2.0 * g * av)])


def reciprocal(a: DualValue) -> DualValue:
    out = 1.0 / a.value
    return a.tape.record('reciprocal', out, [(a, lambda g: -g * out * out)])


def maximum(a: DualValue, c: float = 0.0) -> DualValue:
    """max(x, c) against a constant; gradient 0 where x ≤ c"""
    av = a.value
    return a.tape.record('maximum', np.maximum(av, c), [(a, lambda g: g * (av > c))])


def relu(a: DualValue) -> DualValue:
    return maximum(a, 0.0)


def reduce_sum(a: DualValue, axis=None, keepdims: bool = False) -> DualValue:
    shape = a.shape
    out = np.sum(a.value, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, shape).copy()

    return a.tape.record('sum', out, [(a, vjp)])


def mean(a: DualValue, axis=None, keepdims: bool = False) -> DualValue:
    count = a.value.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return reduce_sum(a, axis=axis, keepdims=keepdims) * (1.0 / float(count))


def reduce_max(a: DualValue) -> DualValue:
    """Глобальный максимум; градиент уходит в первый максимальный элемент"""
    flat = a.value.reshape(-1)
    first = int(np.argmax(flat))

    def vjp(g):
        out = np.zeros(flat.shape)
        out[first] = float(np.asarray(g).reshape(-1)[0])
        return out.reshape(a.shape)

    return a.tape.record('max', np.asarray(flat[first]), [(a, vjp)])


def matmul(a, b) -> DualValue:
    tape, a, b = _lift2(a, b)
    av, bv = a.value, b.value
    return tape.record('matmul', av @ bv, [
        (a, lambda g: g @ np.swapaxes(bv, -1, -2)),
        (b, lambda g: np.swapaxes(av, -1, -2) @ g),
    ])


def getitem(a: DualValue, key) -> DualValue:
    """Gather через numpy-индексацию; повторные индексы суммируются"""
    shape = a.shape

    def vjp(g):
        out = np.zeros(shape)
        np.add.at(out, key, g)
        return out

    return a.tape.record('gather', a.value[key], [(a, vjp)])


def gather(a: DualValue, indices: np.ndarray, axis: int = -1) -> DualValue:
    """np.take along one axis"""
    indices = np.asarray(indices, dtype=np.int64)
    axis = axis % a.ndim
    key = (slice(None),) * axis + (indices,)
    return getitem(a, key)


def reshape(a: DualValue, shape: Tuple[int, ...]) -> DualValue:
    src = a.shape
    return a.tape.record('reshape', a.value.reshape(shape), [(a, lambda g: g.reshape(src))])


def transpose(a: DualValue, axes: Optional[Tuple[int, ...]] = None) -> DualValue:
    inverse = None if axes is None else tuple(np.argsort(axes))
    return a.tape.record('transpose', np.transpose(a.value, axes), [
        (a, lambda g: np.transpose(g, inverse)),
    ])


def concatenate(items: Sequence[DualValue], axis: int = 0) -> DualValue:
    tape = _tape_of(*items)
    items = [tape.lift(it) for it in items]
    sizes = [it.shape[axis] for it in items]
    bounds = np.cumsum([0] + sizes)
    out = np.concatenate([it.value for it in items], axis=axis)
    links = []
    for it, lo, hi in zip(items, bounds[:-1], bounds[1:]):
        def vjp(g, lo=int(lo), hi=int(hi)):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            return g[tuple(index)]
        links.append((it, vjp))
    return tape.record('concat', out, links)


def norm1(a: DualValue, axis=None) -> DualValue:
    """Elementwise ℓ1 norm"""
    return reduce_sum(absolute(a), axis=axis)


def squared_norm(a: DualValue, axis=None) -> DualValue:
    return reduce_sum(square(a), axis=axis)


def ensure_dual(value, tape: Optional[Tape] = None) -> DualValue:
    """Fields and arrays become leaves of a (possibly new) tape"""
    if isinstance(value, DualValue):
        if tape is not None and value.tape is not tape:
            raise InvalidInputError("operands live on different tapes")
        return value
    if tape is None:
        tape = Tape()
    for attr in ('values', 'channels'):
        if hasattr(value, attr):
            return tape.leaf(getattr(value, attr))
    return tape.leaf(value)
