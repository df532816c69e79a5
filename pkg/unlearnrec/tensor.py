# -*- coding: utf-8 -*-
#
# Copyright (c) 2024, Leigh McKenzie
# All rights reserved.
#
# Permission to use, copy, modify, and/or distribute this software for any
# purpose with or without fee is hereby granted, provided that the above
# copyright notice and this permission notice appear in all copies.
#
# THE SOFTWARE IS PROVIDED "AS IS" AND THE AUTHOR DISCLAIMS ALL WARRANTIES
# WITH REGARD TO THIS SOFTWARE INCLUDING ALL IMPLIED WARRANTIES OF
# MERCHANTABILITY AND FITNESS. IN NO EVENT SHALL THE AUTHOR BE LIABLE FOR
# ANY SPECIAL, DIRECT, INDIRECT, OR CONSEQUENTIAL DAMAGES OR ANY DAMAGES
# WHATSOEVER RESULTING FROM LOSS OF USE, DATA OR PROFITS, WHETHER IN AN
# ACTION OF CONTRACT, NEGLIGENCE OR OTHER TORTIOUS ACTION, ARISING OUT OF
# OR IN CONNECTION WITH THE USE OR PERFORMANCE OF THIS SOFTWARE.

"""
Dense tensors with reverse-mode automatic differentiation.

A Tensor wraps a numpy array. Every operation on tensors that require
gradients records its parents and a backward closure; Tensor.backward() walks
the recorded graph in reverse topological order and accumulates gradients
into every tensor that requires them.

Example:
    w = Tensor([[1.0, 2.0], [3.0, 4.0]], requires_grad=True)
    loss = matmul(w, Tensor([[0.0], [1.0]])).sum()
    loss.backward()
    w.grad  # [[0, 1], [0, 1]]
"""

import threading

import numpy as np

from unlearnrec.exceptions import ContractError, DimensionError, NumericError, TargetIndexError

KL_FLOOR = 1e-12

_grad_state = threading.local()


def is_grad_enabled():
    """Return True unless the calling thread is inside a no_grad() block."""
    return getattr(_grad_state, 'enabled', True)


class no_grad:
    """
    Context manager that stops graph recording on the calling thread.

    Inference over a trained model runs inside no_grad() so concurrent readers
    never build graphs on shared parameters.
    """

    def __enter__(self):
        self._previous = is_grad_enabled()
        _grad_state.enabled = False
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        _grad_state.enabled = self._previous
        return False


def _as_array(data, dtype=None):
    array = np.asarray(data)
    if dtype is not None:
        return array.astype(dtype, copy=False)
    if np.issubdtype(array.dtype, np.floating):
        return array
    return array.astype(np.float64)


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to the operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _wrap(value, like=None):
    if isinstance(value, Tensor):
        return value
    if like is not None and np.ndim(value) == 0:
        return Tensor(np.asarray(value, dtype=like.dtype))
    return Tensor(value)


class Tensor:
    """
    An n-dimensional array node in a computation graph.

    Args:
        data (array_like): Values, stored row-major. Floating arrays keep their
            dtype, anything else is converted to float64 unless dtype is given.
        requires_grad (bool): Whether backward() should populate grad.
        dtype (numpy.dtype): Optional storage type.

    Attributes:
        data (numpy.ndarray): The values.
        grad (numpy.ndarray): Gradient accumulator of the same shape as data,
            populated by backward() for tensors that require gradients.
    """

    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = _as_array(data, dtype)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.op = None
        self._parents = ()
        self._backward = None

    @staticmethod
    def _result(data, parents, backward, op):
        out = Tensor(data)
        if is_grad_enabled() and any(parent.requires_grad for parent in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
            out.op = op
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        return self.data.item()

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """
        Back-propagate from this tensor through the recorded graph.

        Args:
            grad (numpy.ndarray): Seed gradient. Defaults to 1 for scalars.

        Raises:
            ContractError: If this tensor does not require gradients, or no
                seed is given for a non-scalar tensor.
        """
        if not self.requires_grad:
            raise ContractError('Tensor does not require grad')

        if grad is None:
            if self.data.size != 1:
                raise ContractError('A seed gradient is required for non-scalar tensors')
            grad = np.ones_like(self.data)

        order = self._topological_order()
        for node in order:
            if node._backward is not None:
                node.grad = None

        self.grad = np.asarray(grad, dtype=self.dtype).reshape(self.shape)

        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            for parent, parent_grad in zip(node._parents, node._backward(node.grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                parent.grad = parent_grad if parent.grad is None else parent.grad + parent_grad

    def _topological_order(self):
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def __add__(self, other):
        other = _wrap(other, self)
        a, b = self, other

        def backward(grad):
            return (_unbroadcast(grad, a.shape) if a.requires_grad else None,
                    _unbroadcast(grad, b.shape) if b.requires_grad else None)

        return Tensor._result(a.data + b.data, (a, b), backward, 'add')

    def __radd__(self, other):
        return _wrap(other, self).__add__(self)

    def __sub__(self, other):
        other = _wrap(other, self)
        a, b = self, other

        def backward(grad):
            return (_unbroadcast(grad, a.shape) if a.requires_grad else None,
                    _unbroadcast(-grad, b.shape) if b.requires_grad else None)

        return Tensor._result(a.data - b.data, (a, b), backward, 'sub')

    def __rsub__(self, other):
        return _wrap(other, self).__sub__(self)

    def __mul__(self, other):
        other = _wrap(other, self)
        a, b = self, other

        def backward(grad):
            return (_unbroadcast(grad * b.data, a.shape) if a.requires_grad else None,
                    _unbroadcast(grad * a.data, b.shape) if b.requires_grad else None)

        return Tensor._result(a.data * b.data, (a, b), backward, 'mul')

    def __rmul__(self, other):
        return _wrap(other, self).__mul__(self)

    def __truediv__(self, other):
        other = _wrap(other, self)
        a, b = self, other

        def backward(grad):
            return (_unbroadcast(grad / b.data, a.shape) if a.requires_grad else None,
                    _unbroadcast(-grad * a.data / (b.data * b.data), b.shape) if b.requires_grad else None)

        return Tensor._result(a.data / b.data, (a, b), backward, 'div')

    def __rtruediv__(self, other):
        return _wrap(other, self).__truediv__(self)

    def __neg__(self):
        def backward(grad):
            return (-grad,)

        return Tensor._result(-self.data, (self,), backward, 'neg')

    def __pow__(self, exponent):
        if isinstance(exponent, Tensor):
            raise ContractError('Only constant exponents are supported')
        x = self.data

        def backward(grad):
            return (grad * exponent * x ** (exponent - 1),)

        return Tensor._result(x ** exponent, (self,), backward, 'pow')

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(_wrap(other), self)

    def __getitem__(self, index):
        if isinstance(index, Tensor):
            index = index.data.astype(np.intp)
        shape, dtype = self.shape, self.dtype

        def backward(grad):
            full = np.zeros(shape, dtype=dtype)
            np.add.at(full, index, grad)
            return (full,)

        return Tensor._result(self.data[index], (self,), backward, 'index')

    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def backward(grad):
            if axis is not None and not keepdims:
                grad = np.expand_dims(grad, axis)
            return (np.broadcast_to(grad, shape).copy(),)

        return Tensor._result(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward, 'sum')

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            count = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape

        def backward(grad):
            return (grad.reshape(original),)

        return Tensor._result(self.data.reshape(shape), (self,), backward, 'reshape')

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))

        def backward(grad):
            return (grad.transpose(inverse),)

        return Tensor._result(self.data.transpose(axes), (self,), backward, 'transpose')

    def exp(self):
        out = np.exp(self.data)

        def backward(grad):
            return (grad * out,)

        return Tensor._result(out, (self,), backward, 'exp')

    def log(self):
        x = self.data

        def backward(grad):
            return (grad / x,)

        return Tensor._result(np.log(x), (self,), backward, 'log')

    def relu(self):
        x = self.data

        def backward(grad):
            return (grad * (x > 0),)

        return Tensor._result(np.maximum(x, 0), (self,), backward, 'relu')

    def clamp_min(self, floor):
        """Element-wise max(x, floor); the gradient is zero where x is clipped."""
        x = self.data

        def backward(grad):
            return (grad * (x > floor),)

        return Tensor._result(np.maximum(x, np.asarray(floor, dtype=x.dtype)), (self,), backward, 'clamp_min')

    def __repr__(self):
        return 'Tensor(shape=%s, dtype=%s, requires_grad=%r)' % (self.shape, self.dtype, self.requires_grad)


def matmul(a, b):
    """
    Matrix product with numpy broadcasting over leading batch dimensions.

    Args:
        a (Tensor): Operand of shape [..., m, k].
        b (Tensor): Operand of shape [..., k, n].

    Returns:
        Tensor: Product of shape [..., m, n].

    Raises:
        DimensionError: If the inner dimensions disagree.
    """
    a, b = _wrap(a), _wrap(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError('Cannot multiply shapes %s and %s' % (a.shape, b.shape))
    try:
        data = np.matmul(a.data, b.data)
    except ValueError as error:
        raise DimensionError('Cannot multiply shapes %s and %s' % (a.shape, b.shape)) from error

    def backward(grad):
        grad_a = grad_b = None
        if a.requires_grad:
            grad_a = _unbroadcast(np.matmul(grad, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            grad_b = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), grad), b.shape)
        return grad_a, grad_b

    return Tensor._result(data, (a, b), backward, 'matmul')


def exp(x):
    return _wrap(x).exp()


def log(x):
    return _wrap(x).log()


def relu(x):
    return _wrap(x).relu()


def _check_finite(x, name):
    if not np.all(np.isfinite(x.data)):
        raise NumericError('%s received non-finite input' % name)
    if x.ndim == 0:
        raise DimensionError('%s requires at least one dimension' % name)


def softmax(v, axis=-1):
    """
    Numerically stable softmax.

    The maximum is subtracted before exponentiation, so the result is
    invariant to adding a constant to every logit.

    Raises:
        NumericError: If any input is NaN or infinite.
    """
    v = _wrap(v)
    _check_finite(v, 'softmax')
    shifted = v.data - v.data.max(axis=axis, keepdims=True)
    exps = np.exp(shifted)
    out = exps / exps.sum(axis=axis, keepdims=True)

    def backward(grad):
        return (out * (grad - (grad * out).sum(axis=axis, keepdims=True)),)

    return Tensor._result(out, (v,), backward, 'softmax')


def log_softmax(v, axis=-1):
    v = _wrap(v)
    _check_finite(v, 'log_softmax')
    shifted = v.data - v.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward(grad):
        return (grad - np.exp(out) * grad.sum(axis=axis, keepdims=True),)

    return Tensor._result(out, (v,), backward, 'log_softmax')


def kl_divergence(p, q, axis=-1, floor=KL_FLOOR):
    """
    KL(p || q) = sum p * ln(p / q) along axis.

    p is a fixed target distribution; gradients flow into q only. Terms with
    p == 0 contribute nothing and q is clamped at floor before the log.

    Args:
        p (array_like): Target distribution(s).
        q (Tensor): Model distribution(s) of the same shape.
        axis (int): Distribution axis.
        floor (float): Lower clamp applied to q.

    Returns:
        Tensor: One divergence per distribution (a scalar for 1-D input).

    Raises:
        DimensionError: If the shapes differ.
    """
    q = _wrap(q)
    target = p.data if isinstance(p, Tensor) else np.asarray(p)
    if target.shape != q.shape:
        raise DimensionError('KL divergence of mismatched shapes %s and %s' % (target.shape, q.shape))
    target = target.astype(q.dtype, copy=False)
    positive = target > 0
    entropy_term = np.where(positive, target * np.log(np.where(positive, target, 1.0)), 0.0).sum(axis=axis)
    cross = (Tensor(target) * q.clamp_min(floor).log()).sum(axis=axis)
    return Tensor(entropy_term.astype(q.dtype, copy=False)) - cross


def cross_entropy_nll(logits, target_index):
    """
    Negative log-likelihood -log softmax(logits)[target_index].

    Args:
        logits (Tensor): Logits of shape [..., n].
        target_index (int|numpy.ndarray): Class indices of shape [...].

    Returns:
        Tensor: Per-row losses (a scalar for 1-D logits).

    Raises:
        TargetIndexError: If any index falls outside [0, n).
    """
    logits = _wrap(logits)
    n = logits.shape[-1]
    targets = np.asarray(target_index)
    if targets.shape != logits.shape[:-1]:
        raise DimensionError('Targets of shape %s do not match logits %s' % (targets.shape, logits.shape))
    if np.any(targets < 0) or np.any(targets >= n):
        raise TargetIndexError('Target index out of range [0, %d)' % n)
    log_probs = log_softmax(logits, axis=-1)
    if logits.ndim == 1:
        return -log_probs[int(targets)]
    flat = log_probs.reshape(-1, n)
    rows = np.arange(flat.shape[0])
    return -flat[rows, targets.reshape(-1).astype(np.intp)].reshape(targets.shape)


def layer_norm(x, gamma, beta, eps=1e-5):
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    variance = (centered * centered).mean(axis=-1, keepdims=True)
    return centered * (variance + eps) ** -0.5 * gamma + beta


def dropout(x, rate, rng):
    """Inverted dropout; identity when rate is 0 or no generator is given."""
    if rate <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / np.asarray(1.0 - rate, dtype=x.dtype)
    return x * keep


def numerical_grad(fn, tensor, eps=1e-5, indices=None):
    """
    Central finite-difference gradient of a scalar function.

    Args:
        fn (callable): Zero-argument function returning a scalar Tensor; it
            must read tensor.data on every call.
        tensor (Tensor): Tensor whose entries are perturbed in place.
        eps (float): Step size.
        indices (list): Optional flat indices to perturb; all entries otherwise.

    Returns:
        numpy.ndarray: Estimated gradient (zero at skipped entries).
    """
    flat = tensor.data.reshape(-1)
    grad = np.zeros(flat.shape, dtype=np.float64)
    entries = range(flat.size) if indices is None else indices
    with no_grad():
        for i in entries:
            original = flat[i]
            flat[i] = original + eps
            upper = float(fn().item())
            flat[i] = original - eps
            lower = float(fn().item())
            flat[i] = original
            grad[i] = (upper - lower) / (2 * eps)
    return grad.reshape(tensor.shape)
