"""Cubic drift, taming and initial data of the stochastic Cahn-Hilliard problem."""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .noise import HurstPair

_FUNCS = {"cos": np.cos, "sin": np.sin, "sqrt": np.sqrt, "exp": np.exp}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class InitialExpression:
    """A closed-form function of ``x`` such as ``1/3 + sqrt(3)*cos(x)/3``.

    Accepts numbers, ``x``, ``pi``, ``e``, the operators ``+ - * / **`` and the
    functions ``cos``, ``sin``, ``sqrt``, ``exp``. Anything else is rejected
    at construction time.
    """

    def __init__(self, source: str):
        self.source = str(source)
        try:
            tree = ast.parse(self.source, mode="eval")
        except SyntaxError as exc:
            raise ValueError(f"cannot parse initial expression {source!r}: {exc.msg}") from None
        self._check(tree.body)
        self._tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ValueError(f"unsupported constant {node.value!r} in {self.source!r}")
        elif isinstance(node, ast.Name):
            if node.id != "x" and node.id not in _CONSTS:
                raise ValueError(f"unknown name {node.id!r} in {self.source!r}")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ValueError(f"unsupported operator in {self.source!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ValueError(f"unsupported unary operator in {self.source!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ValueError(f"unsupported function call in {self.source!r}")
            if len(node.args) != 1 or node.keywords:
                raise ValueError(f"functions take exactly one argument in {self.source!r}")
            self._check(node.args[0])
        else:
            raise ValueError(f"unsupported syntax {type(node).__name__} in {self.source!r}")

    def _eval(self, node, x):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return x if node.id == "x" else _CONSTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, x), self._eval(node.right, x))
        if isinstance(node, ast.UnaryOp):
            val = self._eval(node.operand, x)
            return -val if isinstance(node.op, ast.USub) else val
        return _FUNCS[node.func.id](self._eval(node.args[0], x))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self._eval(self._tree, x), dtype=float), x.shape).copy()

    def __repr__(self):
        return f"InitialExpression({self.source!r})"


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of ``f(x) = a0 x^3 + a1 x^2 + a2 x + a3`` plus noise and data.

    ``drift_enabled=False`` switches the nonlinearity off entirely, which
    leaves a linear equation with a closed spectral solution.
    """

    a0: float
    a1: float
    a2: float
    a3: float
    sigma: float
    hurst: HurstPair
    initial: str = "0"
    horizon: float = 1.0
    drift_enabled: bool = True

    def __post_init__(self):
        if self.drift_enabled and not self.a0 > 0:
            raise ValueError(f"leading coefficient a0 must be positive, got {self.a0}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        # parse eagerly so bad expressions fail at construction
        object.__setattr__(self, "_initial_fn", InitialExpression(self.initial))

    @property
    def initial_function(self) -> InitialExpression:
        return self._initial_fn


def benchmark_params(h1: float = 0.5, h2: float = 0.75, **overrides) -> ModelParams:
    """``(1/3)(u^3 + u^2 - u + 1)`` drift, ``sigma = 1/3``, ``T = 1``, ``u0 = 1/3 + sqrt(3) cos(x)/3``."""
    kwargs = dict(
        a0=1 / 3, a1=1 / 3, a2=-1 / 3, a3=1 / 3, sigma=1 / 3,
        hurst=HurstPair(h1, h2), initial="1/3 + sqrt(3)*cos(x)/3", horizon=1.0,
    )
    kwargs.update(overrides)
    return ModelParams(**kwargs)


def f_scalar(params: ModelParams, x):
    return ((params.a0 * x + params.a1) * x + params.a2) * x + params.a3


def drift_vector(params: ModelParams, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if not params.drift_enabled:
        return np.zeros_like(u)
    return f_scalar(params, u)


@dataclass(frozen=True)
class TamedDrift:
    params: ModelParams
    tau: float

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")


def tame(tamed: TamedDrift, grid: Grid, u) -> np.ndarray:
    """``F(u) / (1 + tau ||F(u)||_{l2})``; batched along leading axes."""
    fu = drift_vector(tamed.params, u)
    if tamed.tau == 0:
        return fu
    norm = np.sqrt(grid.h * np.sum(fu * fu, axis=-1, keepdims=True))
    return fu / (1.0 + tamed.tau * norm)


def initial_grid(params: ModelParams, grid: Grid) -> np.ndarray:
    return params.initial_function(grid.points)


def lipschitz_constant(params: ModelParams) -> float:
    """``C`` with ``|f(x) - f(y)| <= C (1 + x^2 + y^2) |x - y|``."""
    return 3 * params.a0 + 2 * abs(params.a1) + abs(params.a2) + params.a0


def one_sided_constant(params: ModelParams) -> float:
    """``C`` with ``(y - x)(f(x) - f(y)) <= C |x - y|^2``, i.e. ``sup(-f')`` clipped at 0."""
    return max(params.a1**2 / (3 * params.a0) - params.a2, 0.0)
