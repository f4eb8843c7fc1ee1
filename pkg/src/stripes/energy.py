"""The rescaled energy, the unscaled energy, their exact scaling relation,
and the sharp-interface stripe energy.

Rescaled energy per unit volume on the torus [0, L)^d:

    F(u) = (1/L^d) [ M_alpha(u) (C_tau - 1) - NL(u) ],
    M_alpha(u) = 3 alpha int ||grad u||_1^2 + (3/alpha) int W(u),
    NL(u) = int int |u(x + zeta) - u(x)|^2 K_tau(zeta) dx dzeta,

with alpha = eps tau^(1/beta) and C_tau the kernel first moment.  The
unscaled energy uses the tau = 1 kernel with coupling J on the gradient
part; the two are related by an exact change of variables implemented in
``rescaling_identity_check``.

The nonlocal term expands into mass and correlation pieces and is computed
with a circular fast Fourier transform convolution against the certified
periodized kernel; a direct double sum serves as a reference path on small
grids.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from . import kernel as _kernel
from .field import PeriodicField, gradient
from .model import ModelParams, double_well


class NoBracketError(RuntimeError):
    """A line search could not bracket an interior minimum."""


@dataclass(frozen=True)
class EnergyBreakdown:
    """Energy per unit volume, split as total = mm_term - nonlocal_term.

    Both stored terms include their prefactors: mm_term is
    M_alpha(u) (C_tau - 1) / L^d and nonlocal_term is NL(u) / L^d.
    """

    mm_term: float
    nonlocal_term: float
    total: float
    n: int
    L: float
    params: ModelParams

    def to_json(self) -> str:
        return json.dumps({
            "mm_term": self.mm_term,
            "nonlocal_term": self.nonlocal_term,
            "total": self.total,
            "n": self.n,
            "L": self.L,
            "params": self.params.to_dict(),
        })


def modica_mortola(u: PeriodicField, alpha: float) -> float:
    """3 alpha sum ||grad u||_1^2 vol + (3/alpha) sum W(u) vol over one cell."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    vol = u.h_grid ** u.dims
    grads = gradient(u)
    grad_l1_sq = sum(np.abs(g) for g in grads) ** 2
    return float(3.0 * alpha * np.sum(grad_l1_sq) * vol
                 + (3.0 / alpha) * np.sum(double_well(u.values)) * vol)


def _nonlocal_from_grid(values: np.ndarray, kgrid: np.ndarray, spacing: float
                        ) -> float:
    """NL = 2 vol^2 [ (sum K) sum u^2 - sum u (K conv u) ] via circular FFT."""
    d = values.ndim
    vol2 = spacing ** (2 * d)
    ksum = float(np.sum(kgrid))
    # the pair-difference form is invariant under constant shifts; centering
    # makes constant fields evaluate to exactly zero despite FFT rounding
    v = values - float(np.mean(values))
    axes = tuple(range(d))
    conv = np.fft.irfftn(np.fft.rfftn(v, axes=axes) *
                         np.fft.rfftn(kgrid, axes=axes),
                         s=v.shape, axes=axes)
    return float(2.0 * vol2 * (ksum * np.sum(v ** 2) - np.sum(v * conv)))


def _nonlocal_direct(values: np.ndarray, kgrid: np.ndarray, spacing: float
                     ) -> float:
    """Reference double sum over all lattice lags (small grids only)."""
    d = values.ndim
    n = values.shape[0]
    total = 0.0
    for lag in itertools.product(range(n), repeat=d):
        shifted = values
        for ax, s in enumerate(lag):
            shifted = np.roll(shifted, -s, axis=ax)
        total += kgrid[lag] * np.sum((shifted - values) ** 2)
    return float(total * spacing ** (2 * d))


def nonlocal_energy(u: PeriodicField, params: ModelParams,
                    tol: float = 1e-7, shells: int | None = None,
                    method: str = "fft") -> float:
    """int int |u(x+zeta) - u(x)|^2 K_tau(zeta) dx dzeta on the lattice."""
    if u.dims != params.d:
        raise ValueError("field dimension does not match params.d")
    kgrid = _kernel.periodized_kernel_grid(u.L, u.n, params, tol=tol,
                                           shells=shells)
    if method == "fft":
        return _nonlocal_from_grid(u.values, kgrid, u.h_grid)
    if method == "direct":
        if u.n ** u.dims > 16 ** 2 + 1 and u.dims > 1 or u.n > 4096:
            raise ValueError("direct path is for small grids only")
        return _nonlocal_direct(u.values, kgrid, u.h_grid)
    raise ValueError(f"unknown method {method!r}")


def total_energy(u: PeriodicField, params: ModelParams,
                 tol: float = 1e-7, shells: int | None = None
                 ) -> EnergyBreakdown:
    """Rescaled energy per unit volume with its two-term breakdown."""
    c = _kernel.c_tau(params)
    vol_inv = 1.0 / u.L ** u.dims
    mm = modica_mortola(u, params.alpha) * (c - 1.0) * vol_inv
    nl = nonlocal_energy(u, params, tol=tol, shells=shells) * vol_inv
    return EnergyBreakdown(mm_term=mm, nonlocal_term=nl, total=mm - nl,
                           n=u.n, L=u.L, params=params)


def unscaled_energy(u: PeriodicField, J: float, eps: float, L: float | None = None,
                    *, p: float, tol: float = 1e-7, shells: int | None = None
                    ) -> float:
    """Energy with the tau = 1 kernel and coupling J on the gradient part:
    (1/L^d) [ J M_eps(u) - NL_1(u) ]."""
    if J <= 0:
        raise ValueError("J must be positive")
    if L is not None and abs(L - u.L) > 1e-12 * u.L:
        raise ValueError("L does not match the field period")
    params1 = ModelParams(d=u.dims, p=p, tau=1.0, eps=eps, L=u.L)
    vol_inv = 1.0 / u.L ** u.dims
    mm = modica_mortola(u, eps)
    nl = nonlocal_energy(u, params1, tol=tol, shells=shells)
    return float(vol_inv * (J * mm - nl))


def rescaling_identity_check(u: PeriodicField, params: ModelParams,
                             tol: float = 1e-7
                             ) -> tuple[float, float, float]:
    """Evaluate the unscaled energy and the rescaled energy on corresponding
    grids and return (lhs, rhs, gap).

    The field ``u`` is read on the rescaled torus [0, params.L)^d; the same
    sample values on the stretched torus of period L = tau^(-1/beta) params.L
    define the unscaled configuration.  With coupling J = J_c - tau and both
    periodized kernels built from the same number of lattice shells the two
    sides agree to rounding error.
    """
    a = params.kernel_scale
    L_big = u.L / a
    tau_pow = params.tau ** (1.0 + 1.0 / params.beta)
    params1 = ModelParams(d=u.dims, p=params.p, tau=1.0, eps=params.eps,
                          L=L_big)
    m = max(_kernel.kernel_shells_needed(u.L, params, tol),
            _kernel.kernel_shells_needed(L_big, params1, tol))
    J = _kernel.j_c(params) - params.tau
    u_big = PeriodicField(u.dims, u.n, L_big, u.values)
    lhs = unscaled_energy(u_big, J, params.eps, p=params.p, shells=m)
    rhs = tau_pow * total_energy(u, params, shells=m).total
    return lhs, rhs, lhs - rhs


# ---------------------------------------------------------------------------
# sharp-interface stripe energy
# ---------------------------------------------------------------------------

def _segment_linear_moment(z0: float, z1: float, c0: float, c1: float,
                           a: float, q: float) -> float:
    """int_{z0}^{z1} (c0 + c1 z) (z + a)^(-q) dz in closed form."""
    def I0(z):
        return -((z + a) ** (1.0 - q)) / (q - 1.0)

    def I1(z):
        return (-((z + a) ** (2.0 - q)) / (q - 2.0)
                + a * (z + a) ** (1.0 - q) / (q - 1.0))

    return c0 * (I0(z1) - I0(z0)) + c1 * (I1(z1) - I1(z0))


def _square_wave_correlation_integral(h: float, params: ModelParams,
                                      rel_tol: float = 1e-13) -> float:
    """2 int_0^inf t(z) Khat_tau(z) dz where t is the triangle wave
    t(z) = z/h on [0, h], (2h - z)/h on [h, 2h], extended 2h-periodically;
    t is the x-average of |chi(x+z) - chi(x)|^2 for width-h stripes."""
    a = params.kernel_scale
    q = params.q
    c = _kernel.marginal_constant(params.d, params.p)
    total = 0.0
    k = 0
    while True:
        z0 = 2.0 * k * h
        # rising piece: t = (z - 2kh)/h; falling piece: t = (2(k+1)h - z)/h
        piece = _segment_linear_moment(z0, z0 + h, -z0 / h, 1.0 / h, a, q)
        piece += _segment_linear_moment(z0 + h, z0 + 2.0 * h,
                                        (z0 + 2.0 * h) / h, -1.0 / h, a, q)
        total += piece
        z_next = z0 + 2.0 * h
        # Beyond z_next replace t by its mean 1/2: since t - 1/2 integrates
        # to zero over each period and the kernel oscillation telescopes,
        # the replacement error is at most Khat(z_next) * h / 2.
        half_tail = 0.5 * (z_next + a) ** (1.0 - q) / (q - 1.0)
        err = (z_next + a) ** (-q) * h / 2.0
        if err <= rel_tol * max(abs(total + half_tail), 1e-300) and k >= 2:
            total += half_tail
            break
        k += 1
        if k > 10 ** 6:
            raise RuntimeError("correlation integral failed to converge")
    return 2.0 * c * total


def sharp_stripe_energy(h: float, params: ModelParams) -> float:
    """Per-unit-volume sharp-interface energy of width-h stripes:
    (C_tau - 1)/h minus the square-wave nonlocal term."""
    if h <= 0:
        raise ValueError("h must be positive")
    c = _kernel.c_tau(params)
    return (c - 1.0) / h - _square_wave_correlation_integral(h, params)


def golden_section(f, lo: float, hi: float, rel_tol: float = 1e-3
                   ) -> tuple[float, float]:
    """Golden-section minimum of f on [lo, hi]; ties resolve to smaller
    argument.  Returns (argmin, value)."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while (b - a) > rel_tol * max(abs(a), abs(b), 1e-300):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    x = a if f(a) <= f(b) else b
    return x, f(x)


def optimal_sharp_period(params: ModelParams,
                         h_range: tuple[float, float] = (1e-2, 1e2),
                         grid: int = 12, tol: float = 1e-3
                         ) -> tuple[float, float]:
    """Minimize the sharp stripe energy over the half-period h.

    A logarithmic scan over ``grid`` points brackets the minimum; golden
    section refines it to relative tolerance ``tol``.
    """
    lo, hi = h_range
    if not (0 < lo < hi):
        raise ValueError("need 0 < lo < hi")
    hs = np.geomspace(lo, hi, grid)
    vals = np.array([sharp_stripe_energy(h, params) for h in hs])
    i = int(np.argmin(vals))
    if i == 0 or i == grid - 1:
        raise NoBracketError(
            "no interior minimum of the sharp stripe energy in the range")
    return golden_section(lambda h: sharp_stripe_energy(h, params),
                          hs[i - 1], hs[i + 1], rel_tol=tol)
