"""
Differentiable primitives used by the attention blocks and the three architectures.

.. moduleauthor:: PySatNet developers
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from pysatnet.core import ContractError, DimensionError, PoolAxis
from pysatnet.core.constants import BN_EPSILON
from pysatnet.core.tensor import Function, Tensor, asTensor

Operand = Union[Tensor, np.ndarray, float, int]


def _pair(x: Operand, y: Operand) -> Tuple[Tensor, Tensor]:
    # constants adopt the dtype of the tensor operand so float32 graphs stay float32
    if isinstance(x, Tensor) and not isinstance(y, Tensor):
        y = Tensor(np.asarray(y, dtype=x.dtype))
    elif isinstance(y, Tensor) and not isinstance(x, Tensor):
        x = Tensor(np.asarray(x, dtype=y.dtype))
    return asTensor(x), asTensor(y)


def _require4d(x: Tensor, opName: str):
    if x.ndim != 4:
        raise DimensionError(f"{opName} expects a 4-D batch x channel x height x width tensor, got shape {list(x.shape)}")


######################################################################
# Elementwise


class Add(Function):
    def forward(self, x, y):
        return x + y

    def backward(self, grad):
        return grad, grad


class Mul(Function):
    def forward(self, x, y):
        self.x, self.y = x, y
        return x * y

    def backward(self, grad):
        return grad * self.y, grad * self.x


class Neg(Function):
    def forward(self, x):
        return -x

    def backward(self, grad):
        return (-grad,)


class ReLU(Function):
    def forward(self, x):
        self.mask = x > 0
        return np.maximum(x, 0).astype(x.dtype, copy=False)

    def backward(self, grad):
        return (grad * self.mask,)


class Sigmoid(Function):
    def forward(self, x):
        e = np.exp(-np.abs(x))
        self.out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype, copy=False)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


class Softmax(Function):
    def forward(self, x, axis=1):
        self.axis = axis
        shifted = x - x.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        self.out = e / e.sum(axis=axis, keepdims=True)
        return self.out

    def backward(self, grad):
        dot = (grad * self.out).sum(axis=self.axis, keepdims=True)
        return (self.out * (grad - dot),)


class LogSoftmax(Function):
    def forward(self, x, axis=1):
        self.axis = axis
        shifted = x - x.max(axis=axis, keepdims=True)
        logSum = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        out = shifted - logSum
        self.softmax = np.exp(out)
        return out

    def backward(self, grad):
        return (grad - self.softmax * grad.sum(axis=self.axis, keepdims=True),)


######################################################################
# Shape


class Reshape(Function):
    def forward(self, x, shape=()):
        self.inputShape = x.shape
        return x.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.inputShape),)


class Transpose(Function):
    def forward(self, x, axes=()):
        self.axes = tuple(axes) if axes else tuple(reversed(range(x.ndim)))
        return np.transpose(x, self.axes)

    def backward(self, grad):
        return (np.transpose(grad, np.argsort(self.axes)),)


class GetItem(Function):
    def forward(self, x, index=None):
        self.inputShape, self.index = x.shape, index
        return np.array(x[index], copy=True)

    def backward(self, grad):
        out = np.zeros(self.inputShape, dtype=grad.dtype)
        np.add.at(out, self.index, grad)
        return (out,)


class Concat(Function):
    def forward(self, *arrays, axis=0):
        self.axis = axis
        self.sizes = [array.shape[axis] for array in arrays]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        boundaries = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(grad, boundaries, axis=self.axis))


######################################################################
# Reductions


def _normalizeAxes(axis, ndim) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


class Sum(Function):
    def forward(self, x, axis=None, keepdims=False):
        self.inputShape = x.shape
        self.axes = _normalizeAxes(axis, x.ndim)
        self.keepdims = keepdims
        return np.asarray(x.sum(axis=self.axes, keepdims=keepdims))

    def backward(self, grad):
        if not self.keepdims:
            grad = np.expand_dims(grad, self.axes)
        return (np.broadcast_to(grad, self.inputShape),)


class Mean(Sum):
    def forward(self, x, axis=None, keepdims=False):
        out = super(Mean, self).forward(x, axis, keepdims)
        self.count = int(np.prod([x.shape[a] for a in self.axes])) if x.ndim else 1
        return out / self.count

    def backward(self, grad):
        (expanded,) = super(Mean, self).backward(grad)
        return (expanded / self.count,)


class MaxReduce(Function):
    """Max over one or more axes; the gradient goes to the first maximal element."""

    def forward(self, x, axis=None, keepdims=False):
        self.inputShape = x.shape
        self.axes = _normalizeAxes(axis, x.ndim)
        kept = tuple(a for a in range(x.ndim) if a not in self.axes)
        self.permutation = kept + self.axes
        moved = np.transpose(x, self.permutation)
        self.keptShape = moved.shape[:len(kept)]
        flat = moved.reshape(self.keptShape + (-1,))
        self.argmax = flat.argmax(axis=-1)
        self.reducedSize = flat.shape[-1]
        out = np.take_along_axis(flat, self.argmax[..., None], axis=-1)[..., 0]
        if keepdims:
            out = np.expand_dims(out, self.axes)
        return out

    def backward(self, grad):
        grad = grad.reshape(self.keptShape)
        flat = np.zeros(self.keptShape + (self.reducedSize,), dtype=grad.dtype)
        np.put_along_axis(flat, self.argmax[..., None], grad[..., None], axis=-1)
        movedShape = tuple(np.array(self.inputShape)[list(self.permutation)])
        return (np.transpose(flat.reshape(movedShape), np.argsort(self.permutation)),)


######################################################################
# Linear algebra and convolution


class MatMul(Function):
    def forward(self, x, w):
        self.x, self.w = x, w
        return x @ w

    def backward(self, grad):
        return grad @ self.w.T, self.x.T @ grad


class Conv2d(Function):
    """2-D cross-correlation through im2col and a single matrix product.

    Windows are gathered from a channels-last copy of the input, so every copied run is one
    pixel's channel vector. The output is a b x C x H x W view over channels-last memory.
    """

    def forward(self, x, kernel, stride=1, padding=0):
        b, c, h, w = x.shape
        outC, _, kh, kw = kernel.shape
        self.stride, self.padding = stride, padding
        self.inputShape = x.shape
        self.kernelShape = kernel.shape

        channelsLast = x.transpose(0, 2, 3, 1)
        if padding:
            channelsLast = np.pad(channelsLast, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
        windows = sliding_window_view(channelsLast, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
        self.outH, self.outW = windows.shape[1], windows.shape[2]
        self.paddedShape = channelsLast.shape

        # rows: one per output pixel, columns: kh * kw * c receptive-field entries
        self.cols = windows.transpose(0, 1, 2, 4, 5, 3).reshape(b * self.outH * self.outW, kh * kw * c)
        self.kernelMatrix = kernel.transpose(0, 2, 3, 1).reshape(outC, -1)
        out = self.cols @ self.kernelMatrix.T
        return out.reshape(b, self.outH, self.outW, outC).transpose(0, 3, 1, 2)

    def backward(self, grad):
        b, c, h, w = self.inputShape
        outC, _, kh, kw = self.kernelShape
        s, p = self.stride, self.padding

        gradRows = grad.transpose(0, 2, 3, 1).reshape(-1, outC)
        gradKernel = (gradRows.T @ self.cols).reshape(outC, kh, kw, c).transpose(0, 3, 1, 2)

        gradCols = (gradRows @ self.kernelMatrix).reshape(b, self.outH, self.outW, kh, kw, c)
        gradPadded = np.zeros(self.paddedShape, dtype=grad.dtype)
        for i in range(kh):
            for j in range(kw):
                gradPadded[:, i:i + s * self.outH:s, j:j + s * self.outW:s, :] += gradCols[:, :, :, i, j, :]

        gradInput = gradPadded[:, p:p + h, p:p + w, :] if p else gradPadded
        return gradInput.transpose(0, 3, 1, 2), gradKernel


class MaxPool2d(Function):
    """Non-overlapping k x k max pooling; trailing rows/columns that do not fill a window are dropped."""

    def forward(self, x, kernel=2):
        b, c, h, w = x.shape
        self.inputShape, self.kernel = x.shape, kernel
        self.outH, self.outW = h // kernel, w // kernel
        cropped = x[:, :, :self.outH * kernel, :self.outW * kernel]
        windows = cropped.reshape(b, c, self.outH, kernel, self.outW, kernel).transpose(0, 1, 2, 4, 3, 5)
        windows = windows.reshape(b, c, self.outH, self.outW, kernel * kernel)
        self.argmax = windows.argmax(axis=-1)
        return np.take_along_axis(windows, self.argmax[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        b, c, h, w = self.inputShape
        k = self.kernel
        windows = np.zeros((b, c, self.outH, self.outW, k * k), dtype=grad.dtype)
        np.put_along_axis(windows, self.argmax[..., None], grad[..., None], axis=-1)
        windows = windows.reshape(b, c, self.outH, self.outW, k, k).transpose(0, 1, 2, 4, 3, 5)
        out = np.zeros(self.inputShape, dtype=grad.dtype)
        out[:, :, :self.outH * k, :self.outW * k] = windows.reshape(b, c, self.outH * k, self.outW * k)
        return (out,)


def _adaptiveMatrix(inSize: int, outSize: int, dtype) -> np.ndarray:
    matrix = np.zeros((outSize, inSize), dtype=dtype)
    for i in range(outSize):
        start = (i * inSize) // outSize
        end = -((-(i + 1) * inSize) // outSize)
        matrix[i, start:end] = 1.0 / (end - start)
    return matrix


class AdaptiveAvgPool2d(Function):
    def forward(self, x, outH=1, outW=1):
        self.rows = _adaptiveMatrix(x.shape[2], outH, x.dtype)
        self.cols = _adaptiveMatrix(x.shape[3], outW, x.dtype)
        return np.einsum('ih,bchw,jw->bcij', self.rows, x, self.cols, optimize=True)

    def backward(self, grad):
        return (np.einsum('ih,bcij,jw->bchw', self.rows, grad, self.cols, optimize=True),)


class BatchNorm(Function):
    """Per-channel normalization of a 4-D tensor followed by the affine map.

    ``mean``/``var`` are the statistics used for normalization. With ``training=True`` they
    are the batch statistics and the backward rule differentiates through them.
    """

    def forward(self, x, gamma, beta, mean=None, var=None, eps=BN_EPSILON, training=True):
        shape = (1, -1, 1, 1)
        self.training = training
        self.invStd = (1.0 / np.sqrt(var + eps)).astype(x.dtype).reshape(shape)
        self.xhat = (x - mean.reshape(shape)) * self.invStd
        self.gamma = gamma.reshape(shape)
        return self.gamma * self.xhat + beta.reshape(shape)

    def backward(self, grad):
        axes = (0, 2, 3)
        gradGamma = (grad * self.xhat).sum(axis=axes)
        gradBeta = grad.sum(axis=axes)
        gradXhat = grad * self.gamma
        if not self.training:
            return gradXhat * self.invStd, gradGamma, gradBeta

        count = grad.shape[0] * grad.shape[2] * grad.shape[3]
        gradInput = (self.invStd / count) * (
            count * gradXhat
            - gradXhat.sum(axis=axes, keepdims=True)
            - self.xhat * (gradXhat * self.xhat).sum(axis=axes, keepdims=True))
        return gradInput, gradGamma, gradBeta


######################################################################
# Functional API


def add(x: Operand, y: Operand) -> Tensor:
    return Add.apply(*_pair(x, y))


def mul(x: Operand, y: Operand) -> Tensor:
    return Mul.apply(*_pair(x, y))


def neg(x: Operand) -> Tensor:
    return Neg.apply(x)


def matmul(x: Tensor, w: Tensor) -> Tensor:
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {list(x.shape)} @ {list(w.shape)}")
    return MatMul.apply(x, w)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Fully-connected layer, ``weight`` is in_features x out_features."""
    out = matmul(x, weight)
    return out + bias if bias is not None else out


def relu(x: Tensor) -> Tensor:
    return ReLU.apply(x)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


def softmax(x: Tensor, axis: int = 1) -> Tensor:
    return Softmax.apply(x, axis=axis)


def logSoftmax(x: Tensor, axis: int = 1) -> Tensor:
    return LogSoftmax.apply(x, axis=axis)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def transpose(x: Tensor, axes: Sequence[int] = ()) -> Tensor:
    return Transpose.apply(x, axes=tuple(axes))


def getItem(x: Tensor, index) -> Tensor:
    return GetItem.apply(x, index=index)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [asTensor(t) for t in tensors]
    reference = tensors[0].shape
    for tensor in tensors[1:]:
        if tensor.ndim != len(reference) or any(
                a != b for d, (a, b) in enumerate(zip(tensor.shape, reference)) if d != axis % len(reference)):
            raise DimensionError(f"concat shape mismatch along axis {axis}: {list(reference)} vs {list(tensor.shape)}")
    return Concat.apply(*tensors, axis=axis)


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    return Mean.apply(x, axis=axis, keepdims=keepdims)


def maxReduce(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    return MaxReduce.apply(x, axis=axis, keepdims=keepdims)


def conv2d(x: Tensor, kernel: Tensor, bias: Optional[Tensor] = None, stride: int = 1, padding: int = 0) -> Tensor:
    x, kernel = asTensor(x), asTensor(kernel)
    if x.ndim != 4 or kernel.ndim != 4 or kernel.shape[1] != x.shape[1]:
        raise DimensionError(f"conv2d shape mismatch: input {list(x.shape)}, kernel {list(kernel.shape)}")
    if stride < 1 or padding < 0:
        raise ContractError(f"conv2d needs stride >= 1 and padding >= 0, got stride={stride} padding={padding}")
    kh, kw = kernel.shape[2], kernel.shape[3]
    if x.shape[2] + 2 * padding < kh or x.shape[3] + 2 * padding < kw:
        raise DimensionError(f"conv2d kernel {list(kernel.shape)} larger than padded input {list(x.shape)}")

    out = Conv2d.apply(x, kernel, stride=stride, padding=padding)
    if bias is not None:
        if bias.shape != (kernel.shape[0],):
            raise DimensionError(f"conv2d bias shape {list(bias.shape)} does not match kernel {list(kernel.shape)}")
        out = out + reshape(bias, (1, -1, 1, 1))
    return out


def maxPool2d(x: Tensor, kernel: int = 2) -> Tensor:
    _require4d(x, "max_pool2d")
    if x.shape[2] < kernel or x.shape[3] < kernel:
        raise DimensionError(f"max_pool2d window {kernel}x{kernel} larger than input {list(x.shape)}")
    return MaxPool2d.apply(x, kernel=kernel)


def adaptiveAvgPool2d(x: Tensor, outH: int, outW: int) -> Tensor:
    _require4d(x, "adaptive_avg_pool2d")
    if x.shape[2] == 0 or x.shape[3] == 0:
        raise DimensionError(f"adaptive_avg_pool2d on an empty spatial extent {list(x.shape)}")
    return AdaptiveAvgPool2d.apply(x, outH=outH, outW=outW)


def globalAvgPool(x: Tensor) -> Tensor:
    """Mean over height x width; output is batch x channel x 1 x 1."""
    _require4d(x, "global_avg_pool")
    if x.shape[2] == 0 or x.shape[3] == 0:
        raise DimensionError(f"global_avg_pool on an empty spatial extent {list(x.shape)}")
    return mean(x, axis=(2, 3), keepdims=True)


def globalMaxPool(x: Tensor) -> Tensor:
    _require4d(x, "global_max_pool")
    return maxReduce(x, axis=(2, 3), keepdims=True)


def directionalPool(x: Tensor, axis: Union[PoolAxis, str]) -> Tensor:
    """Per-row means (``height``, b x c x H x 1) or per-column means (``width``, b x c x 1 x W)."""
    _require4d(x, "directional_pool")
    if isinstance(axis, str):
        axis = PoolAxis[axis.upper()]
    if axis == PoolAxis.HEIGHT:
        return mean(x, axis=3, keepdims=True)
    return mean(x, axis=2, keepdims=True)


def channelwiseAvgAndMax(x: Tensor) -> Tensor:
    """Per-pixel mean and max over channels, concatenated into b x 2 x H x W."""
    _require4d(x, "channelwise_avg_and_max")
    return concat([mean(x, axis=1, keepdims=True), maxReduce(x, axis=1, keepdims=True)], axis=1)


def batchNorm(x: Tensor, gamma: Tensor, beta: Tensor, runningMean: np.ndarray, runningVar: np.ndarray,
              training: bool, momentum: float, eps: float = BN_EPSILON) -> Tensor:
    """Batch normalization over (batch, height, width); updates the running statistics in place when training."""
    _require4d(x, "batch_norm")
    if x.shape[1] != gamma.shape[0]:
        raise DimensionError(f"batch_norm expects {gamma.shape[0]} channels, got input {list(x.shape)}")

    if training:
        batchMean = x.data.mean(axis=(0, 2, 3))
        batchVar = x.data.var(axis=(0, 2, 3))
        count = x.shape[0] * x.shape[2] * x.shape[3]
        unbiased = batchVar * count / max(count - 1, 1)
        runningMean *= (1.0 - momentum)
        runningMean += momentum * batchMean
        runningVar *= (1.0 - momentum)
        runningVar += momentum * unbiased
        return BatchNorm.apply(x, gamma, beta, mean=batchMean, var=batchVar, eps=eps, training=True)

    return BatchNorm.apply(x, gamma, beta, mean=runningMean, var=runningVar, eps=eps, training=False)


def broadcastGate(x: Tensor, gate: Tensor) -> Tensor:
    """Multiplies b x c x H x W by a b x c x 1 x 1, b x c x H x 1, b x c x 1 x W or b x 1 x H x W gate."""
    _require4d(x, "gate multiply")
    if gate.ndim != 4 or gate.shape[0] != x.shape[0] or any(
            g not in (1, s) for g, s in zip(gate.shape[1:], x.shape[1:])):
        raise DimensionError(f"gate shape {list(gate.shape)} cannot broadcast over {list(x.shape)}")
    return mul(x, gate)


def dropoutMask(shape: Tuple[int, ...], rate: float, rng: np.random.Generator, dtype) -> np.ndarray:
    keep = rng.random(shape) >= rate
    return (keep / (1.0 - rate)).astype(dtype)
