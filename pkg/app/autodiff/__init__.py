from .gradcheck import GradCheckReport, analytic_gradient, finite_difference_check
from .tape import (
    DualValue,
    Tape,
    absolute,
    add,
    concatenate,
    div,
    ensure_dual,
    exp,
    gather,
    getitem,
    log,
    matmul,
    maximum,
    mean,
    mul,
    neg,
    norm1,
    reciprocal,
    reduce_max,
    reduce_sum,
    relu,
    reshape,
    softplus,
    square,
    squared_norm,
    sub,
    transpose,
)

__all__ = [
    'GradCheckReport', 'analytic_gradient', 'finite_difference_check',
    'DualValue', 'Tape', 'absolute', 'add', 'concatenate', 'div', 'ensure_dual', 'exp', 'gather', 'getitem',
    'log', 'matmul', 'maximum', 'mean', 'mul', 'neg', 'norm1', 'reciprocal', 'reduce_max',
    'reduce_sum', 'relu', 'reshape', 'softplus', 'square', 'squared_norm', 'sub', 'transpose',
]
