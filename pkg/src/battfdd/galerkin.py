"""
Intrusive stochastic Galerkin form of the two-node thermal model.

Current and conduction resistance are Gaussian, ``I = I0 + I1 xi1`` and
``R_c = R0 + R1 xi2``.  Both temperatures are expanded on the same Hermite
basis and the model is projected onto every basis function.  The projected
system is linear in the temperature coefficients::

    dTc/dt = (R_e s + G (Ts - Tc)) / C_c
    dTs/dt = ((T_f e0 - Ts) / R_u - G (Ts - Tc)) / C_s

where ``s`` holds the coefficients of ``I^2`` and ``G`` is the Galerkin
operator for multiplication by ``1/R_c``.  The state vector is
``(Tc_0 .. Tc_Q, Ts_0 .. Ts_Q)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError
from .gpc import GalerkinTensors, GpcSurrogate, MultiIndexBasis, expand_transform, norms_and_triples, default_basis
from .thermal import BatteryParams, n_steps_for, rk4


@dataclass(frozen=True)
class UncertainInput:
    """A Gaussian input ``mean + std * xi_germ``."""

    mean: float
    std: float = 0.0
    germ: int = 0

    def __post_init__(self):
        if self.std < 0:
            raise DomainError(f"std must be >= 0, got {self.std}")

    def surrogate(self, basis: MultiIndexBasis) -> GpcSurrogate:
        return GpcSurrogate.gaussian(basis, self.mean, self.std, self.germ)


def galerkin_product(a, b, tensors: GalerkinTensors) -> np.ndarray:
    """Coefficients of the projected product of two expansions."""
    return np.einsum("i,j,ijk->k", a, b, tensors.triple) / tensors.norm_sq


def multiplication_operator(r, tensors: GalerkinTensors) -> np.ndarray:
    """Matrix M with (M x)_k = <r(xi) x(xi), phi_k> / <phi_k^2>."""
    return np.einsum("j,ijk->ki", r, tensors.triple) / tensors.norm_sq[:, None]


@dataclass(frozen=True)
class GalerkinSystem:
    params: BatteryParams
    current: UncertainInput
    resistance: UncertainInput
    basis: MultiIndexBasis
    tensors: GalerkinTensors
    heat: np.ndarray  # coefficients of R_e * I^2
    conductance: np.ndarray  # Galerkin operator of 1/R_c
    A: np.ndarray
    b: np.ndarray

    @property
    def n(self) -> int:
        return self.basis.size

    @property
    def dim(self) -> int:
        return 2 * self.basis.size

    def rhs(self, t, x):
        return self.A @ x + self.b

    def ambient_init(self) -> np.ndarray:
        x = np.zeros(self.dim)
        x[0] = x[self.n] = self.params.T_f
        return x

    def steady_state(self) -> np.ndarray:
        return np.linalg.solve(self.A, -self.b)

    def surrogates(self, x):
        n = self.n
        return GpcSurrogate(self.basis, x[:n]), GpcSurrogate(self.basis, x[n:])

    @cached_property
    def steady_surrogates(self):
        return self.surrogates(self.steady_state())


def assemble(
    params: BatteryParams,
    current: UncertainInput,
    resistance: UncertainInput,
    basis: MultiIndexBasis | None = None,
    quad_order: int = 10,
) -> GalerkinSystem:
    """Build the projected coefficient system.

    ``I^2`` is a polynomial of degree two and is projected exactly through the
    triple-product tensor.  ``1/R_c`` is expanded on the basis by quadrature
    and multiplied back in through the same tensor.
    """
    basis = basis or default_basis()
    if current.germ == resistance.germ and current.std and resistance.std:
        raise DomainError("current and resistance must depend on different germs")
    if resistance.mean - 3.0 * resistance.std <= 0:
        raise DomainError(
            f"conduction resistance {resistance.mean} +/- 3*{resistance.std} reaches zero"
        )
    tensors = norms_and_triples(basis)
    i_coeffs = current.surrogate(basis).coeffs
    heat = params.R_e * galerkin_product(i_coeffs, i_coeffs, tensors)
    inv_rc = expand_transform(lambda r: 1.0 / r, resistance.surrogate(basis), quad_order)
    G = multiplication_operator(inv_rc.coeffs, tensors)

    n = basis.size
    eye = np.eye(n)
    A = np.zeros((2 * n, 2 * n))
    A[:n, :n] = -G / params.C_c
    A[:n, n:] = G / params.C_c
    A[n:, :n] = G / params.C_s
    A[n:, n:] = (-eye / params.R_u - G) / params.C_s
    b = np.zeros(2 * n)
    b[:n] = heat / params.C_c
    b[n] = params.T_f / (params.R_u * params.C_s)
    return GalerkinSystem(params, current, resistance, basis, tensors, heat, G, A, b)


@dataclass
class GpcTrajectory:
    time: np.ndarray
    coeffs: np.ndarray  # (n_times, 2 * size)
    basis: MultiIndexBasis

    @property
    def n(self) -> int:
        return self.basis.size

    def mean_core(self):
        return self.coeffs[:, 0]

    def mean_surface(self):
        return self.coeffs[:, self.n]

    def variances(self):
        norm = self.basis.norm_sq[1:]
        n = self.n
        var_c = (self.coeffs[:, 1:n] ** 2) @ norm
        var_s = (self.coeffs[:, n + 1 :] ** 2) @ norm
        return var_c, var_s

    def to_csv(self, path):
        n = self.n
        var_c, var_s = self.variances()
        header = ["time_s"] + [f"Tc{k}" for k in range(n)] + [f"Ts{k}" for k in range(n)] + ["var_Tc", "var_Ts"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, row, vc, vs in zip(self.time, self.coeffs, var_c, var_s):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row] + [repr(float(vc)), repr(float(vs))])


def integrate_gpc(sys: GalerkinSystem, t_span: float, dt: float = 1.0, init=None) -> GpcTrajectory:
    n = n_steps_for(t_span, dt)
    init = sys.ambient_init() if init is None else np.asarray(init, dtype=float)
    if init.shape != (sys.dim,):
        raise DomainError(f"initial coefficient vector must have length {sys.dim}")
    y = rk4(sys.rhs, init, 0.0, dt, n)
    return GpcTrajectory(np.arange(n + 1) * dt, y, sys.basis)


def surrogates_at(traj: GpcTrajectory, t: float):
    """(T_c, T_s) surrogates at the grid point nearest to ``t``."""
    t0, t1 = traj.time[0], traj.time[-1]
    step = traj.time[1] - traj.time[0] if len(traj.time) > 1 else 0.0
    if t < t0 - 0.5 * step or t > t1 + 0.5 * step:
        raise IndexError(f"t={t} outside trajectory span [{t0}, {t1}]")
    k = int(np.argmin(np.abs(traj.time - t)))
    n = traj.n
    row = traj.coeffs[k]
    return GpcSurrogate(traj.basis, row[:n]), GpcSurrogate(traj.basis, row[n:])
