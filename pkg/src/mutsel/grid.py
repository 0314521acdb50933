"""Uniform 1-D trait grids, trapezoid quadrature and density fields."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIN_NODES = 16


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class TraitGrid:
    """Uniform grid on [x_min, x_max] with trapezoid quadrature weights."""

    x_min: float
    x_max: float
    n: int
    h: float
    nodes: np.ndarray
    quad_weights: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, TraitGrid):
            return NotImplemented
        return (
            self.n == other.n
            and self.x_min == other.x_min
            and self.x_max == other.x_max
        )

    def __hash__(self):
        return hash((self.x_min, self.x_max, self.n))

    def indicator(self, lo: float, hi: float) -> "Field":
        """Indicator field of the closed interval [lo, hi]."""
        vals = ((self.nodes >= lo - 1e-12) & (self.nodes <= hi + 1e-12)).astype(float)
        return Field(self, vals)


def make_grid(x_min: float, x_max: float, n: int, *, min_nodes: int = MIN_NODES) -> TraitGrid:
    if not (np.isfinite(x_min) and np.isfinite(x_max)):
        raise GridError("grid bounds must be finite")
    if x_min >= x_max:
        raise GridError(f"x_min={x_min} must be < x_max={x_max}")
    if n < min_nodes:
        raise GridError(f"need at least {min_nodes} nodes, got {n}")
    nodes = np.linspace(x_min, x_max, n)
    h = (x_max - x_min) / (n - 1)
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return TraitGrid(float(x_min), float(x_max), int(n), float(h), nodes, w)


@dataclass
class Field:
    """Values of a density (or any trait function) sampled on a grid."""

    grid: TraitGrid
    values: np.ndarray
    is_density: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise GridError(
                f"field shape {self.values.shape} does not match grid size {self.grid.n}"
            )
        if not np.all(np.isfinite(self.values)):
            raise GridError("field values must be finite")
        if self.is_density and np.any(self.values < 0):
            raise GridError("density field must be nonnegative")

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.is_density)

    def __add__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__


def _check_same_grid(f: Field, g: Field) -> None:
    if f.grid != g.grid:
        raise GridError("fields live on different grids")


def l1_norm(f: Field) -> float:
    """Quadrature L1 norm: sum of w_i |f_i|."""
    return float(np.sum(f.grid.quad_weights * np.abs(f.values)))


def integrate(f: Field) -> float:
    """Signed quadrature integral of f over the window."""
    return float(np.sum(f.grid.quad_weights * f.values))


def inner(f: Field, g: Field) -> float:
    """Quadrature inner product sum w_i f_i g_i."""
    _check_same_grid(f, g)
    return float(np.sum(f.grid.quad_weights * f.values * g.values))


def restrict(f: Field, set_indicator: Field) -> Field:
    """Pointwise product with a {0,1} indicator field."""
    _check_same_grid(f, set_indicator)
    ind = set_indicator.values
    if not np.all((ind == 0.0) | (ind == 1.0)):
        raise GridError("indicator field must take values in {0, 1}")
    return Field(f.grid, f.values * ind)
