from typing import Dict

import numpy as np

from errors import ConfigurationError, DimensionError, ForwardCacheError, NumericalError

Params = Dict[str, np.ndarray]


def sgd_step(params: Params, grads: Params, lr: float) -> Params:
    """p ← p - lr·g, sem momentum nem weight decay; devolve um novo dicionário."""
    if not lr > 0.0:
        raise ConfigurationError(f"lr deve ser positivo, recebido {lr}")
    if set(params) != set(grads):
        raise DimensionError(f"gradientes {sorted(grads)} não cobrem os parâmetros {sorted(params)}")
    updated: Params = {}
    for name, value in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != np.shape(value):
            raise DimensionError(f"gradiente de '{name}' tem forma {grad.shape}, esperado {np.shape(value)}")
        if not np.all(np.isfinite(grad)):
            raise NumericalError(f"gradiente não finito em '{name}'")
        updated[name] = value - lr * grad
    return updated


def backprop_through(model, loss_gradient: np.ndarray) -> Params:
    """Gradientes dos parâmetros de uma ResonanceHead ou EnergyModel a partir do último forward."""
    if getattr(model, "cache", None) is None:
        raise ForwardCacheError(f"{type(model).__name__}: backward chamado sem forward em cache")
    param_grads, _ = model.backward(loss_gradient)
    return param_grads
