"""Dense layers, activations and optimizers for the numpy autoencoder."""

from abc import ABC, abstractmethod

import numpy as np
from scipy.special import expit

from energy_sched.errors import InvalidParameterError


def glorot_uniform(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def dense(x, weight, bias):
    return x @ weight + bias


def tanh_forward(a):
    return np.tanh(a)


def tanh_backward(grad_out, h):
    """Gradient through tanh given its output h."""
    return grad_out * (1.0 - h * h)


def sigmoid_forward(a):
    return expit(a)


def sigmoid_backward(grad_out, y):
    return grad_out * y * (1.0 - y)


def mlp_forward(x, layers):
    """tanh stack; returns every layer's output with the input first."""
    outputs = [x]
    h = x
    for weight, bias in layers:
        h = tanh_forward(dense(h, weight, bias))
        outputs.append(h)
    return outputs


def mlp_backward(grad_out, layers, outputs):
    """Backprop through `mlp_forward`; returns (per-layer (dW, db), grad wrt input)."""
    grads = [None] * len(layers)
    grad = grad_out
    for i in range(len(layers) - 1, -1, -1):
        weight, _ = layers[i]
        da = tanh_backward(grad, outputs[i + 1])
        grads[i] = (outputs[i].T @ da, da.sum(axis=0))
        grad = da @ weight.T
    return grads, grad


# ─── Optimizers ───────────────────────────────────────────────────────────────


class Optimizer(ABC):
    def __init__(self, learning_rate):
        if learning_rate < 0:
            raise InvalidParameterError(f"learning rate must be >= 0, got {learning_rate}")
        self.learning_rate = learning_rate

    @abstractmethod
    def step(self, arrays, grads):
        """Return updated copies of `arrays` (a name -> ndarray dict)."""


class SGD(Optimizer):
    def step(self, arrays, grads):
        return {name: value - self.learning_rate * grads[name] for name, value in arrays.items()}


class Adam(Optimizer):
    def __init__(self, learning_rate, beta1=0.9, beta2=0.999, epsilon=1e-8):
        super().__init__(learning_rate)
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, arrays, grads):
        self.t += 1
        updated = {}
        for name, value in arrays.items():
            g = grads[name]
            m = self.beta1 * self.m.get(name, 0.0) + (1.0 - self.beta1) * g
            v = self.beta2 * self.v.get(name, 0.0) + (1.0 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            m_hat = m / (1.0 - self.beta1**self.t)
            v_hat = v / (1.0 - self.beta2**self.t)
            updated[name] = value - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)
        return updated


OPTIMIZER_DICT = {
    "sgd": SGD,
    "adam": Adam,
}
