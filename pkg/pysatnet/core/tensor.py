"""
Dense tensors with a reverse-mode automatic-differentiation graph.

.. moduleauthor:: PySatNet developers
"""

import contextlib
import logging
import threading
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np

from pysatnet.core import ContractError, NumericalError

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, int, Sequence[float]]

# graph recording is switched per thread so concurrent inference keeps separate tapes
_threadState = threading.local()
_anomalyDetection = False
_defaultDtype = np.float32


def isGradEnabled() -> bool:
    return getattr(_threadState, 'gradEnabled', True)


@contextlib.contextmanager
def noGrad():
    """Disables graph recording inside the block (evaluation passes)."""
    previous = isGradEnabled()
    _threadState.gradEnabled = False
    try:
        yield
    finally:
        _threadState.gradEnabled = previous


def setAnomalyDetection(enabled: bool):
    """When enabled every op asserts that finite inputs produced a finite output."""
    global _anomalyDetection
    _anomalyDetection = bool(enabled)


def isAnomalyDetectionEnabled() -> bool:
    return _anomalyDetection


def setDefaultDtype(dtype):
    global _defaultDtype
    _defaultDtype = np.dtype(dtype).type


def getDefaultDtype():
    return _defaultDtype


class Function(object):
    """Base class for differentiable operations.

    Subclasses implement ``forward`` on raw numpy arrays and ``backward``, which receives
    dL/d(output) and returns one gradient (or None) per input tensor.
    """

    def __init__(self, *tensors: "Tensor"):
        self.tensors = tensors

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError()

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError()

    @classmethod
    def apply(cls, *tensors: Union["Tensor", ArrayLike], **kwargs: Any) -> "Tensor":
        tensors = tuple(asTensor(tensor) for tensor in tensors)
        func = cls(*tensors)
        outData = func.forward(*(tensor.data for tensor in tensors), **kwargs)

        if isAnomalyDetectionEnabled() and not np.all(np.isfinite(outData)):
            if all(np.all(np.isfinite(tensor.data)) for tensor in tensors):
                raise NumericalError(
                    f"{cls.__name__} produced a non-finite output from finite inputs",
                    diagnostics={'op': cls.__name__, 'shapes': [list(t.shape) for t in tensors]})

        requiresGrad = isGradEnabled() and any(tensor.requiresGrad for tensor in tensors)
        return Tensor(outData, requiresGrad=requiresGrad, creator=func if requiresGrad else None)

    @staticmethod
    def unbroadcast(grad: np.ndarray, toShape: Tuple[int, ...]) -> np.ndarray:
        """Sums out the dimensions that numpy broadcasting expanded."""
        if grad.shape == tuple(toShape):
            return grad

        while grad.ndim > len(toShape):
            grad = grad.sum(axis=0)

        for dim, size in enumerate(toShape):
            if size == 1 and grad.shape[dim] != 1:
                grad = grad.sum(axis=dim, keepdims=True)

        return grad


class Tensor(object):
    """Rank-N real array with an optional gradient slot.

    Image tensors are ordered batch x channel x height x width. ``grad``, once populated,
    has the same shape as ``data``.
    """

    # makes numpy scalars defer to the Tensor reflected operators
    __array_priority__ = 100

    def __init__(self, data: Union["Tensor", ArrayLike], requiresGrad: bool = False,
                 creator: Optional[Function] = None, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        array = np.asarray(data, dtype=dtype)
        if array.dtype.kind != 'f':
            array = array.astype(getDefaultDtype())
        self.data: np.ndarray = array
        self.requiresGrad = bool(requiresGrad)
        self.grad: Optional[np.ndarray] = None
        self.creator = creator

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, requiresGrad=False)

    def zeroGrad(self):
        self.grad = np.zeros_like(self.data)

    def accumulateGrad(self, grad: np.ndarray):
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad = self.grad + grad

    def backward(self):
        return backward(self)

    def reshape(self, *shape) -> "Tensor":
        from pysatnet.core import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        from pysatnet.core import ops
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes)

    def sum(self, axis=None, keepdims=False) -> "Tensor":
        from pysatnet.core import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False) -> "Tensor":
        from pysatnet.core import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def __getitem__(self, index) -> "Tensor":
        from pysatnet.core import ops
        return ops.getItem(self, index)

    def __add__(self, other) -> "Tensor":
        from pysatnet.core import ops
        return ops.add(self, other)

    def __radd__(self, other) -> "Tensor":
        from pysatnet.core import ops
        return ops.add(other, self)

    def __sub__(self, other) -> "Tensor":
        from pysatnet.core import ops
        return ops.add(self, ops.neg(other))

    def __rsub__(self, other) -> "Tensor":
        from pysatnet.core import ops
        return ops.add(other, ops.neg(self))

    def __mul__(self, other) -> "Tensor":
        from pysatnet.core import ops
        return ops.mul(self, other)

    def __rmul__(self, other) -> "Tensor":
        from pysatnet.core import ops
        return ops.mul(other, self)

    def __truediv__(self, other) -> "Tensor":
        from pysatnet.core import ops
        if isinstance(other, Tensor):
            raise ContractError("Division is only supported by scalars")
        return ops.mul(self, 1.0 / float(other))

    def __neg__(self) -> "Tensor":
        from pysatnet.core import ops
        return ops.neg(self)

    def __matmul__(self, other) -> "Tensor":
        from pysatnet.core import ops
        return ops.matmul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={list(self.shape)}, dtype={self.dtype}, requiresGrad={self.requiresGrad})"


def asTensor(value: Union[Tensor, ArrayLike], dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requiresGrad=False, dtype=dtype)


class GradTape(object):
    """Operations reachable from a root tensor, recorded in topological order.

    Every node's inputs precede it; ``backward`` walks the list in reverse and visits each
    node exactly once.
    """

    def __init__(self, root: Tensor):
        self.__root = root
        self.__nodes: List[Tensor] = []

        visited = set()
        stack = [(root, False)]
        while stack:
            tensor, expanded = stack.pop()
            if expanded:
                self.__nodes.append(tensor)
                continue
            if id(tensor) in visited:
                continue
            visited.add(id(tensor))
            stack.append((tensor, True))
            if tensor.creator is not None:
                for parent in tensor.creator.tensors:
                    if parent.requiresGrad and id(parent) not in visited:
                        stack.append((parent, False))

    def getRoot(self) -> Tensor:
        return self.__root

    def getNodes(self) -> List[Tensor]:
        return list(self.__nodes)

    def __len__(self):
        return len(self.__nodes)

    def backward(self):
        root = self.__root
        grads = {id(root): np.ones_like(root.data)}

        for tensor in reversed(self.__nodes):
            grad = grads.pop(id(tensor), None)
            if grad is None:
                continue

            if tensor.creator is None:
                tensor.accumulateGrad(grad)
                continue

            inputGrads = tensor.creator.backward(grad)
            if not isinstance(inputGrads, tuple):
                inputGrads = (inputGrads,)

            for parent, parentGrad in zip(tensor.creator.tensors, inputGrads):
                if parentGrad is None or not parent.requiresGrad:
                    continue
                parentGrad = Function.unbroadcast(np.asarray(parentGrad), parent.shape)
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + parentGrad
                else:
                    grads[key] = parentGrad


def backward(loss: Tensor, parameters: Optional[Sequence[Tensor]] = None) -> GradTape:
    """Populates ``grad`` on every requires-grad tensor reachable from a scalar loss.

    Parameters listed in ``parameters`` that the loss does not reach get a zero gradient.
    """
    if loss.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {list(loss.shape)}")
    if not loss.requiresGrad:
        raise ContractError("The loss was not recorded on any tape; nothing requires grad")

    tape = GradTape(loss)
    tape.backward()

    if parameters is not None:
        for parameter in parameters:
            if parameter.grad is None:
                parameter.zeroGrad()

    return tape
