"""Discrete weighted-convolution operators and the nonlinear update maps.

Provides the per-host linear operators (kernel convolution against a fitness
weight), their symmetrized counterparts, the nonlinear single-host and coupled
update maps whose fixed points are the steady states, and the analytic
linearization of the coupled map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .grid import Field, GridError, TraitGrid, inner
from .model import HostDerived, MutationKernel, Problem

MODES = ("direct", "fft")


class OperatorError(ValueError):
    pass


@dataclass
class ConvolutionEngine:
    """Quadrature convolution with the scaled mutation kernel.

    ``direct`` mode evaluates the full O(n^2) sum and serves as the reference;
    ``fft`` mode computes the identical sum with an FFT-based linear
    convolution.  Both return g(x_i) = sum_j w_j m_eps(x_i - x_j) f(x_j).
    """

    kernel: MutationKernel
    grid: TraitGrid
    mode: str = "fft"

    def __post_init__(self):
        if self.mode not in MODES:
            raise OperatorError(f"unknown convolution mode {self.mode!r}")
        if self.kernel.grid != self.grid:
            raise OperatorError("kernel was sampled on a different grid")

    def convolve_values(self, values: np.ndarray) -> np.ndarray:
        n = self.grid.n
        wf = self.grid.quad_weights * values
        if self.mode == "direct":
            full = np.convolve(wf, self.kernel.samples)
        else:
            full = fftconvolve(wf, self.kernel.samples)
        # samples[j] sits at offset (j-(n-1))h, so node i of the output is
        # entry (n-1)+i of the full linear convolution
        return full[n - 1 : 2 * n - 1]

    def convolve(self, f: Field) -> Field:
        if f.grid != self.grid:
            raise GridError("field lives on a different grid than the engine")
        return Field(self.grid, self.convolve_values(f.values))


@dataclass
class WeightedConvolutionOperator:
    """f -> prefactor * m_eps * (weight . f): the per-host linear operator."""

    weight: Field
    prefactor: float
    engine: ConvolutionEngine

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        return self.prefactor * self.engine.convolve_values(self.weight.values * values)

    def apply(self, f: Field) -> Field:
        if f.grid != self.engine.grid:
            raise GridError("field lives on a different grid than the operator")
        return Field(self.engine.grid, self.apply_values(f.values))

    def dense_matrix(self) -> np.ndarray:
        """Explicit n x n matrix: M[i, j] = pref * m_eps(x_i - x_j) w_j weight_j."""
        grid = self.engine.grid
        n = grid.n
        idx = np.arange(n)
        kern = self.engine.kernel.samples[idx[:, None] - idx[None, :] + n - 1]
        return self.prefactor * kern * (grid.quad_weights * self.weight.values)[None, :]

    def dense_symmetric(self) -> np.ndarray:
        """Similar symmetric matrix with the same spectrum.

        Conjugating M by diag(sqrt(w) * sqrt(weight)) yields
        B[i, j] = pref * sqrt(w_i weight_i) m_eps(x_i - x_j) sqrt(w_j weight_j),
        the quadrature form of the square-root-symmetrized operator.
        """
        grid = self.engine.grid
        n = grid.n
        idx = np.arange(n)
        kern = self.engine.kernel.samples[idx[:, None] - idx[None, :] + n - 1]
        s = np.sqrt(grid.quad_weights * self.weight.values)
        return self.prefactor * s[:, None] * kern * s[None, :]

    def symmetrized_apply_values(self, values: np.ndarray) -> np.ndarray:
        """Apply sqrtW . m_eps * (sqrtW . f) with sqrtW = sqrt(weight)."""
        s = np.sqrt(self.weight.values)
        return self.prefactor * s * self.engine.convolve_values(s * values)


def host_operator(problem: Problem, k: int, *, mode: str | None = None) -> WeightedConvolutionOperator:
    """Linear operator of host k: (xi_k Lambda / theta) m_eps * (Psi_k f)."""
    mp = problem.mp
    engine = ConvolutionEngine(problem.kernel, problem.grid, mode or problem.mode)
    pref = mp.hosts[k - 1].xi * mp.lambda_ / mp.theta
    return WeightedConvolutionOperator(problem.host(k).psi, pref, engine)


def combined_operator(problem: Problem, *, mode: str | None = None) -> WeightedConvolutionOperator:
    """Sum of the two host operators, as a single weighted convolution."""
    mp = problem.mp
    engine = ConvolutionEngine(problem.kernel, problem.grid, mode or problem.mode)
    weight = Field(
        problem.grid,
        (
            mp.hosts[0].xi * problem.host(1).psi.values
            + mp.hosts[1].xi * problem.host(2).psi.values
        ),
    )
    return WeightedConvolutionOperator(weight, mp.lambda_ / mp.theta, engine)


# ---------------------------------------------------------------------------
# nonlinear update maps

def _check_nonnegative(f: Field) -> None:
    if np.any(f.values < 0):
        raise OperatorError("update maps require a nonnegative input density")


def beta_mass(problem: Problem, k: int, f: Field) -> float:
    """Quadrature integral of beta_k * f."""
    return inner(problem.host(k).beta, f)


def host_update_values(
    problem: Problem, k: int, op: WeightedConvolutionOperator, values: np.ndarray
) -> np.ndarray:
    hd = problem.host(k)
    mass = float(np.sum(problem.grid.quad_weights * hd.beta.values * values))
    return op.apply_values(values) / (1.0 + mass / problem.mp.theta)

def host_update(problem: Problem, k: int, f: Field, *, op: WeightedConvolutionOperator | None = None) -> Field:
    """Single-host map: L_k f / (1 + theta^-1 int beta_k f)."""
    _check_nonnegative(f)
    if op is None:
        op = host_operator(problem, k)
    return Field(problem.grid, host_update_values(problem, k, op, f.values))


@dataclass
class UpdateMap:
    """The coupled fixed-point map T = T_1 + T_2 with cached host operators."""

    problem: Problem
    ops: tuple[WeightedConvolutionOperator, WeightedConvolutionOperator]

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        out = host_update_values(self.problem, 1, self.ops[0], values)
        out += host_update_values(self.problem, 2, self.ops[1], values)
        return out

    def apply(self, f: Field) -> Field:
        _check_nonnegative(f)
        return Field(self.problem.grid, self.apply_values(f.values))

    def linearized_values(self, a: np.ndarray, h: np.ndarray) -> np.ndarray:
        """Derivative of the map at density a, applied to direction h."""
        grid = self.problem.grid
        theta = self.problem.mp.theta
        out = np.zeros_like(h)
        for k in (1, 2):
            hd = self.problem.host(k)
            op = self.ops[k - 1]
            den = 1.0 + float(np.sum(grid.quad_weights * hd.beta.values * a)) / theta
            beta_h = float(np.sum(grid.quad_weights * hd.beta.values * h))
            out += op.apply_values(h) / den
            out -= op.apply_values(a) / den**2 * (beta_h / theta)
        return out

    def linearized(self, a: Field, h: Field) -> Field:
        _check_nonnegative(a)
        return Field(self.problem.grid, self.linearized_values(a.values, h.values))


def update_map(problem: Problem, *, mode: str | None = None) -> UpdateMap:
    return UpdateMap(
        problem,
        (host_operator(problem, 1, mode=mode), host_operator(problem, 2, mode=mode)),
    )


def full_update(problem: Problem, f: Field) -> Field:
    """Coupled map applied once (convenience wrapper around UpdateMap)."""
    return update_map(problem).apply(f)


def mass_bound(problem: Problem) -> float:
    """A-priori L1 bound (Lambda / (delta theta)) sum_k xi_k max(r_k)."""
    mp = problem.mp
    return (
        mp.lambda_
        / (mp.delta * mp.theta)
        * sum(
            mp.hosts[k].xi * float(problem.derived[k].r.values.max())
            for k in (0, 1)
        )
    )
