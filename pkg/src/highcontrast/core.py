"""Domain types, parameter validation and the per-edge discretisation substrate.

The periodic cell is the three-edge cycle e1 (stiff), e2 (soft), e3 (stiff).
Before the soft-edge dilation the edge lengths are ``eps * (l1, l2, l3)``;
after it they are ``(eps * l1, l2, eps * l3)``.  Functions on the cycle are
stored edge by edge as :class:`EdgeFunction` samples on uniform nodes.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, GridMismatch

EDGE_IDS = ("e1", "e2", "e3")
DEFAULT_N = 256
LENGTH_TOL = 1e-12


@dataclass(frozen=True)
class CellParams:
    """Unit-cell description of the high-contrast coefficient.

    The coefficient equals ``a1`` on ``[0, l1)``, ``eps**2`` on
    ``[l1, l1 + l2)`` and ``a3`` on ``[l1 + l2, 1)``.
    """

    a1: float
    a3: float
    l1: float
    l2: float
    l3: float
    eps: float

    @property
    def stiff_length(self) -> float:
        """Total relative length ``l1 + l3`` of the stiff component."""
        return self.l1 + self.l3

    @property
    def a(self) -> float:
        """Common stiff coefficient; only defined when ``a1 == a3``."""
        require_equal_stiffness(self)
        return self.a1

    def lengths(self, rescaled: bool = True) -> tuple[float, float, float]:
        """Edge lengths after (default) or before the soft-edge dilation."""
        e = self.eps
        if rescaled:
            return (e * self.l1, self.l2, e * self.l3)
        return (e * self.l1, e * self.l2, e * self.l3)

    def with_eps(self, eps: float) -> "CellParams":
        return make_cell(self.a1, self.a3, self.l1, self.l2, eps)


def make_cell(a1: float, a3: float, l1: float, l2: float, eps: float) -> CellParams:
    """Validate the cell parameters and close ``l3 = 1 - l1 - l2``."""
    for name, value in (("a1", a1), ("a3", a3)):
        if not (math.isfinite(value) and value > 0):
            raise DomainError(name, f"must be a positive real, got {value!r}")
    if not (math.isfinite(l1) and l1 > 0):
        raise DomainError("l1", f"must satisfy 0 < l1, got {l1!r}")
    if not (math.isfinite(l2) and l2 > 0):
        raise DomainError("l2", f"must be positive, got {l2!r}")
    if not l1 + l2 < 1:
        raise DomainError("l2", f"l1 + l2 must be < 1, got {l1 + l2!r}")
    if not (math.isfinite(eps) and 0 < eps <= 1):
        raise DomainError("eps", f"must lie in (0, 1], got {eps!r}")
    return CellParams(float(a1), float(a3), float(l1), float(l2), 1.0 - l1 - l2, float(eps))


def require_equal_stiffness(c: CellParams) -> None:
    """Modules built on the modified graph need ``a1 == a3``."""
    if c.a1 != c.a3:
        raise DomainError("a3", f"a1 == a3 is required here, got a1={c.a1}, a3={c.a3}")


@dataclass(frozen=True)
class SpectralPoint:
    """Spectral parameter ``z`` and its root ``k`` with ``arg k`` in ``[0, pi)``."""

    z: complex
    k: complex


def spectral_point(z: complex) -> SpectralPoint:
    z = complex(z)
    k = cmath.sqrt(z)
    # principal root has arg in (-pi/2, pi/2]; flip the lower half onto (pi/2, pi)
    if k.imag < 0 or (k.imag == 0 and k.real < 0):
        k = -k
    return SpectralPoint(z, k)


def from_k(k: complex) -> SpectralPoint:
    """Spectral point with a prescribed root, checked against the branch."""
    sp = spectral_point(complex(k) ** 2)
    if abs(sp.k - k) > 1e-12 * max(1.0, abs(k)):
        raise DomainError("k", f"{k!r} is not on the branch arg k in [0, pi)")
    return SpectralPoint(sp.z, complex(k))


@dataclass(frozen=True)
class Quasimomentum:
    """Fibre parameter ``t`` in ``[0, 2 pi / eps)`` together with ``tau = eps t``."""

    t: float
    tau: float
    eps: float


def quasimomentum(tau: float, eps: float) -> Quasimomentum:
    """Build from the rescaled parameter; ``tau`` is reduced modulo ``2 pi``."""
    if not eps > 0:
        raise DomainError("eps", f"must be positive, got {eps!r}")
    tau = math.fmod(float(tau), 2 * math.pi)
    if tau < 0:
        tau += 2 * math.pi
    return Quasimomentum(tau / eps, tau, float(eps))


def quasimomentum_from_t(t: float, eps: float) -> Quasimomentum:
    return quasimomentum(eps * t, eps)


# --------------------------------------------------------------------------
# discretisation


def quadrature(length: float, n: int, rule: str = "simpson") -> tuple[np.ndarray, np.ndarray]:
    """Uniform nodes ``0..length`` (``n + 1`` of them) and composite weights."""
    if n < 1:
        raise DomainError("n", f"grid size must be >= 1, got {n}")
    x = np.linspace(0.0, length, n + 1)
    h = length / n
    if rule == "trapezoid":
        w = np.full(n + 1, h)
        w[0] = w[-1] = h / 2
    elif rule == "simpson":
        if n % 2:
            raise DomainError("n", f"Simpson's rule needs an even grid size, got {n}")
        w = np.full(n + 1, 2 * h / 3)
        w[1::2] = 4 * h / 3
        w[0] = w[-1] = h / 3
    else:
        raise DomainError("rule", f"unknown quadrature rule {rule!r}")
    return x, w


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EdgeFunction:
    """Complex samples of a function on one edge ``[0, length]``."""

    edge_id: str
    length: float
    samples: np.ndarray
    quad_weights: np.ndarray
    rule: str = "simpson"
    nodes: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.edge_id not in EDGE_IDS:
            raise DomainError("edge_id", f"unknown edge {self.edge_id!r}")
        s = np.asarray(self.samples, dtype=complex)
        w = np.asarray(self.quad_weights, dtype=float)
        if s.shape != w.shape or s.ndim != 1:
            raise GridMismatch(f"{self.edge_id}: samples {s.shape} vs weights {w.shape}")
        object.__setattr__(self, "samples", _frozen(s))
        object.__setattr__(self, "quad_weights", _frozen(w))
        if self.nodes is None:
            object.__setattr__(self, "nodes", _frozen(np.linspace(0.0, self.length, s.size)))

    @property
    def n(self) -> int:
        return self.samples.size - 1

    @classmethod
    def from_callable(cls, edge_id, length, fn, n=DEFAULT_N, rule="simpson"):
        x, w = quadrature(length, n, rule)
        return cls(edge_id, length, np.asarray(fn(x), dtype=complex) * np.ones_like(x), w, rule, x)

    @classmethod
    def zeros(cls, edge_id, length, n=DEFAULT_N, rule="simpson"):
        x, w = quadrature(length, n, rule)
        return cls(edge_id, length, np.zeros(n + 1, dtype=complex), w, rule, x)

    def like(self, samples) -> "EdgeFunction":
        """Same grid, new samples."""
        return EdgeFunction(self.edge_id, self.length, samples, self.quad_weights, self.rule, self.nodes)

    def check_same_grid(self, other: "EdgeFunction") -> None:
        if (
            self.edge_id != other.edge_id
            or self.samples.size != other.samples.size
            or abs(self.length - other.length) > LENGTH_TOL * max(1.0, self.length)
        ):
            raise GridMismatch(
                f"{self.edge_id}(len={self.length}, n={self.n}) vs "
                f"{other.edge_id}(len={other.length}, n={other.n})"
            )

    def inner(self, other: "EdgeFunction") -> complex:
        self.check_same_grid(other)
        return complex(np.sum(self.quad_weights * self.samples * np.conj(other.samples)))

    def norm(self) -> float:
        return math.sqrt(max(0.0, float(np.sum(self.quad_weights * np.abs(self.samples) ** 2))))

    def __add__(self, other):
        self.check_same_grid(other)
        return self.like(self.samples + other.samples)

    def __sub__(self, other):
        self.check_same_grid(other)
        return self.like(self.samples - other.samples)

    def __mul__(self, scalar):
        return self.like(self.samples * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class StateVector:
    """Element of ``L2(e1) + L2(e2) + L2(e3)`` stored edge by edge."""

    components: tuple[EdgeFunction, EdgeFunction, EdgeFunction]

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != 3 or tuple(c.edge_id for c in comps) != EDGE_IDS:
            raise GridMismatch("a StateVector needs components on (e1, e2, e3) in order")
        object.__setattr__(self, "components", comps)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, j: int) -> EdgeFunction:
        return self.components[j]

    @property
    def lengths(self) -> tuple[float, float, float]:
        return tuple(c.length for c in self.components)

    @classmethod
    def from_callables(cls, lengths: Sequence[float], fns: Sequence[Callable], n=DEFAULT_N, rule="simpson"):
        return cls(tuple(
            EdgeFunction.from_callable(eid, L, fn, n, rule) for eid, L, fn in zip(EDGE_IDS, lengths, fns)
        ))

    @classmethod
    def zeros(cls, lengths: Sequence[float], n=DEFAULT_N, rule="simpson"):
        return cls(tuple(EdgeFunction.zeros(eid, L, n, rule) for eid, L in zip(EDGE_IDS, lengths)))

    def like(self, samples: Sequence[np.ndarray]) -> "StateVector":
        return StateVector(tuple(c.like(s) for c, s in zip(self.components, samples)))

    def flat(self) -> np.ndarray:
        """Concatenated samples (edge order e1, e2, e3)."""
        return np.concatenate([c.samples for c in self.components])

    def flat_weights(self) -> np.ndarray:
        return np.concatenate([c.quad_weights for c in self.components])

    def from_flat(self, values: np.ndarray) -> "StateVector":
        sizes = np.cumsum([c.samples.size for c in self.components])[:-1]
        return self.like(np.split(np.asarray(values), sizes))

    def norm(self) -> float:
        return math.sqrt(max(0.0, inner(self, self).real))

    def __add__(self, other):
        return StateVector(tuple(a + b for a, b in zip(self, other)))

    def __sub__(self, other):
        return StateVector(tuple(a - b for a, b in zip(self, other)))

    def __mul__(self, scalar):
        return StateVector(tuple(a * scalar for a in self))

    __rmul__ = __mul__


def inner(u: StateVector, v: StateVector) -> complex:
    """Quadrature surrogate of the L2 inner product on the three edges."""
    return sum((a.inner(b) for a, b in zip(u, v)), 0j)
