"""
Central finite-difference verification of analytic gradients.

.. moduleauthor:: PySatNet developers
"""

import logging
from typing import Callable, Optional, Sequence

import numpy as np

from pysatnet.core import ContractError
from pysatnet.core.tensor import Tensor, backward

logger = logging.getLogger(__name__)


# below this gradient norm the error is measured in absolute terms
ABSOLUTE_FLOOR = 1.0


def relativeError(analytic: np.ndarray, numeric: np.ndarray, floor: float = ABSOLUTE_FLOOR) -> float:
    """Norm of the difference over the larger gradient norm, or over ``floor`` when both are smaller.

    The floor keeps finite-difference round-off from counting as a full mismatch when the
    exact gradient is zero, as for a bias that feeds a training-mode batch norm.
    """
    diff = np.linalg.norm(analytic - numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), floor)
    return float(diff / scale)


def gradCheck(fn: Callable[..., Tensor], inputs: Sequence[Tensor], eps: float = 1e-5,
              maxEntries: Optional[int] = None, seed: int = 0) -> float:
    """Compares backward() against central differences and returns the worst relative error.

    ``fn`` maps the input tensors to an output of any shape; the output is reduced to a scalar
    with a fixed random projection so every output entry contributes. Inputs should be float64.
    With ``maxEntries`` only that many randomly chosen entries per input are perturbed.
    """
    inputs = list(inputs)
    for tensor in inputs:
        if tensor.dtype != np.float64:
            raise ContractError(f"gradCheck needs float64 inputs, got {tensor.dtype}")
        # perturbations write through a flat view
        tensor.data = np.ascontiguousarray(tensor.data)
        tensor.requiresGrad = True
        tensor.grad = None

    rng = np.random.default_rng(seed)
    output = fn(*inputs)
    projection = Tensor(rng.standard_normal(output.shape))

    loss = (output * projection).sum()
    backward(loss, inputs)

    def evaluate() -> float:
        return float((fn(*inputs).data * projection.data).sum())

    worst = 0.0
    for position, tensor in enumerate(inputs):
        flat = tensor.data.reshape(-1)
        entries = np.arange(flat.size)
        if maxEntries is not None and flat.size > maxEntries:
            entries = np.sort(rng.choice(flat.size, size=maxEntries, replace=False))

        numeric = np.zeros(len(entries))
        for slot, entry in enumerate(entries):
            original = flat[entry]
            flat[entry] = original + eps
            plus = evaluate()
            flat[entry] = original - eps
            minus = evaluate()
            flat[entry] = original
            numeric[slot] = (plus - minus) / (2.0 * eps)

        analytic = tensor.grad.reshape(-1)[entries]
        error = relativeError(analytic, numeric)
        logger.debug(f"gradCheck input {position} shape {list(tensor.shape)}: relative error {error:.3e}")
        worst = max(worst, error)

    return worst
