"""
Smooth periodic scalar fields on a flat torus
"""

import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy
from sympy.core.function import AppliedUndef
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from ..core.errors import ConfigError, ModelError
from ..core.settings import LabSettings

logger = logging.getLogger(__name__)


class Field:
    """Scalar field evaluated on coordinate arrays shaped (d, *S)"""

    dim: int = 0

    @property
    def is_constant(self) -> bool:
        return False

    def value(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> Any:
        """JSON-serializable description, used for content hashing"""
        raise NotImplementedError

    def constant_value(self) -> float:
        raise ModelError("field is not constant")


class ConstantField(Field):
    """Field with the same value everywhere"""

    def __init__(self, constant: float, dim: int):
        self.constant = float(constant)
        self.dim = dim

    @property
    def is_constant(self) -> bool:
        return True

    def constant_value(self) -> float:
        return self.constant

    def value(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.full(points.shape[1:], self.constant)

    def grad(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.zeros((self.dim,) + points.shape[1:])

    def hess(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.zeros((self.dim, self.dim) + points.shape[1:])

    def describe(self) -> Any:
        return self.constant


class ExpressionField(Field):
    """Closed-form field parsed from a restricted expression language"""

    def __init__(self, text: str, lengths: Sequence[float], pointer: str = '', prefix: str = 'x'):
        self.text = str(text)
        self.lengths = tuple(float(v) for v in lengths)
        self.dim = len(self.lengths)
        self.pointer = pointer
        self.symbols = sympy.symbols(f'{prefix}1:{self.dim + 1}') if self.dim else ()
        self.expr = self._parse(prefix)

        # Derivatives
        grads = [sympy.diff(self.expr, s) for s in self.symbols]
        hesses = [[sympy.diff(g, s) for s in self.symbols] for g in grads]
        self._value = sympy.lambdify(self.symbols, self.expr, 'numpy')
        self._grad = [sympy.lambdify(self.symbols, g, 'numpy') for g in grads]
        self._hess = [[sympy.lambdify(self.symbols, h, 'numpy') for h in row] for row in hesses]

        self._check_periodic()

    def _parse(self, prefix: str) -> sympy.Expr:
        """Parse the expression text inside a closed namespace"""
        namespace: Dict[str, Any] = {
            'Integer': sympy.Integer,
            'Float': sympy.Float,
            'Rational': sympy.Rational,
            'Symbol': sympy.Symbol,
            'Function': sympy.Function,
            'pi': sympy.pi,
            'sin': sympy.sin,
            'cos': sympy.cos,
            'exp': sympy.exp,
            'sqrt': sympy.sqrt,
        }
        local = {str(s): s for s in self.symbols}
        try:
            expr = parse_expr(self.text, local_dict=local, global_dict=namespace,
                              transformations=standard_transformations)
        except (SyntaxError, TypeError, ValueError, sympy.SympifyError) as exc:
            raise ConfigError(f"cannot parse expression {self.text!r}: {exc}", self.pointer)

        if not isinstance(expr, sympy.Expr):
            raise ConfigError(f"expression {self.text!r} is not scalar", self.pointer)
        unknown = expr.free_symbols - set(self.symbols)
        if unknown:
            names = ', '.join(sorted(str(s) for s in unknown))
            raise ConfigError(f"unknown names in {self.text!r}: {names} "
                              f"(allowed: {prefix}1..{prefix}{self.dim})", self.pointer)
        if expr.atoms(AppliedUndef):
            raise ConfigError(f"unknown function in {self.text!r}; allowed: "
                              f"{', '.join(LabSettings.EXPRESSION_NAMES)}", self.pointer)
        if expr.has(sympy.I) or expr.has(sympy.zoo) or expr.has(sympy.nan):
            raise ConfigError(f"expression {self.text!r} is not real", self.pointer)
        return expr

    def _check_periodic(self):
        """Sample x and x + L_i e_i and compare"""
        if not self.dim or self.expr.is_number:
            return
        rng = np.random.default_rng(0)
        base = rng.uniform(0.0, 1.0, size=(self.dim, LabSettings.PERIODIC_PROBES))
        base *= np.asarray(self.lengths)[:, None]
        reference = self.value(base)
        scale = max(1.0, float(np.max(np.abs(reference))))
        for axis, length in enumerate(self.lengths):
            shifted = base.copy()
            shifted[axis] += length
            defect = float(np.max(np.abs(self.value(shifted) - reference)))
            if not np.isfinite(defect) or defect > LabSettings.TOL_PERIODIC * scale:
                raise ModelError(
                    f"expression {self.text!r} is not periodic with period {length:g} "
                    f"along axis {axis + 1} (defect {defect:.3e})", self.pointer)

    @staticmethod
    def _broadcast(raw: Any, shape: Tuple[int, ...]) -> np.ndarray:
        return np.broadcast_to(np.asarray(raw, dtype=float), shape).copy()

    def value(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return self._broadcast(self._value(*points), points.shape[1:])

    def grad(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        shape = points.shape[1:]
        return np.stack([self._broadcast(g(*points), shape) for g in self._grad]) \
            if self.dim else np.zeros((0,) + shape)

    def hess(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        shape = points.shape[1:]
        out = np.zeros((self.dim, self.dim) + shape)
        for i, row in enumerate(self._hess):
            for j, h in enumerate(row):
                out[i, j] = self._broadcast(h(*points), shape)
        return out

    def describe(self) -> Any:
        return self.text


class SampledField(Field):
    """Trigonometric interpolant of periodic grid samples"""

    CHUNK = 512

    def __init__(self, samples: Any, lengths: Sequence[float], pointer: str = ''):
        self.lengths = tuple(float(v) for v in lengths)
        self.dim = len(self.lengths)
        self.pointer = pointer
        data = np.asarray(samples, dtype=float)
        if data.ndim != self.dim:
            raise ConfigError(f"grid samples must have {self.dim} axes, got {data.ndim}", pointer)
        if not np.all(np.isfinite(data)):
            raise ModelError("grid samples contain non-finite values", pointer)
        self.samples = self._drop_endpoints(data)
        self.shape = self.samples.shape

        self.coefficients = np.fft.fftn(self.samples) / self.samples.size
        self.wavenumbers = [2.0 * np.pi * np.fft.fftfreq(m, d=length / m)
                            for m, length in zip(self.shape, self.lengths)]
        mesh = np.meshgrid(*self.wavenumbers, indexing='ij')
        self._k = np.stack([k.ravel() for k in mesh])
        self._c = self.coefficients.ravel()

    def _drop_endpoints(self, data: np.ndarray) -> np.ndarray:
        """Accept M or M+1 samples per axis; a duplicated endpoint must match"""
        scale = max(1.0, float(np.max(np.abs(data))))
        for axis in range(self.dim):
            if data.shape[axis] % 2 == 1:
                first = np.take(data, 0, axis=axis)
                last = np.take(data, -1, axis=axis)
                defect = float(np.max(np.abs(first - last)))
                if defect > LabSettings.TOL_PERIODIC * scale:
                    raise ModelError(f"samples are not periodic along axis {axis + 1} "
                                     f"(endpoint defect {defect:.3e})", self.pointer)
                data = np.take(data, np.arange(data.shape[axis] - 1), axis=axis)
            if data.shape[axis] < 2:
                raise ConfigError("grid samples need at least two points per axis", self.pointer)
        return data

    def _synthesize(self, weights: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Evaluate sum_k weights[:, k] e^{i k.x}, chunked over points"""
        points = np.asarray(points, dtype=float)
        shape = points.shape[1:]
        flat = points.reshape(self.dim, -1)
        out = np.empty((weights.shape[0], flat.shape[1]))
        for start in range(0, flat.shape[1], self.CHUNK):
            block = flat[:, start:start + self.CHUNK]
            out[:, start:start + self.CHUNK] = np.real(weights @ np.exp(1j * (self._k.T @ block)))
        return out.reshape((weights.shape[0],) + shape)

    def value(self, points: np.ndarray) -> np.ndarray:
        return self._synthesize(self._c[None, :], points)[0]

    def grad(self, points: np.ndarray) -> np.ndarray:
        return self._synthesize(1j * self._k * self._c[None, :], points)

    def hess(self, points: np.ndarray) -> np.ndarray:
        weights = -self._k[:, None, :] * self._k[None, :, :] * self._c[None, None, :]
        flat = self._synthesize(weights.reshape(self.dim * self.dim, -1), points)
        return flat.reshape((self.dim, self.dim) + flat.shape[1:])

    def describe(self) -> Any:
        return {'grid': self.samples.tolist()}


def make_field(spec: Any, lengths: Sequence[float], pointer: str, prefix: str = 'x') -> Field:
    """Build a field from a number, an expression string or {"grid": samples}"""
    dim = len(lengths)
    if isinstance(spec, bool):
        raise ConfigError("expected a number, expression or grid samples", pointer)
    if isinstance(spec, (int, float)):
        return ConstantField(spec, dim)
    if isinstance(spec, str):
        field = ExpressionField(spec, lengths, pointer, prefix)
        if field.expr.is_number:
            return ConstantField(float(field.expr), dim)
        return field
    if isinstance(spec, dict):
        extra = set(spec) - {'grid'}
        if extra or 'grid' not in spec:
            raise ConfigError("sampled fields are written as {\"grid\": [...]}", pointer)
        return SampledField(spec['grid'], lengths, pointer)
    raise ConfigError(f"unsupported field specification of type {type(spec).__name__}", pointer)


def field_matrix_value(rows: List[List[Field]], points: np.ndarray) -> np.ndarray:
    """Evaluate a matrix of fields to shape (d, d, *S)"""
    return np.stack([np.stack([f.value(points) for f in row]) for row in rows])


def describe_all(fields: Optional[Sequence[Any]]) -> Any:
    if fields is None:
        return None
    return [f.describe() if isinstance(f, Field) else describe_all(f) for f in fields]
