import numpy as np
import pytest


def central_difference(loss_fn, array: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Gradiente numérico por diferença central, perturbando `array` no lugar."""
    grad = np.zeros_like(array)
    it = np.nditer(array, flags=["multi_index"])
    for _ in it:
        index = it.multi_index
        original = array[index]
        array[index] = original + step
        upper = loss_fn()
        array[index] = original - step
        lower = loss_fn()
        array[index] = original
        grad[index] = (upper - lower) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale < 1e-12:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


@pytest.fixture
def numeric_gradient():
    return central_difference


@pytest.fixture
def rel_error():
    return relative_error
