"""The one-dimensional variational problem.

The 1D energy per unit length of an L-periodic profile g with coefficient
gamma >= 1 is

    F1d(gamma, g) = (3 (C_tau - 1) / L) int_0^L [ alpha gamma |g'|^2
                     + W(g) / (alpha gamma) ] dx
                   - (1/L) int_0^L int_R |g(x) - g(y)|^2 Khat_tau(x - y),

with alpha = eps tau^(1/beta).  Candidate minimizers are periodic
reflections of profiles in the class C_h = { g on [0, h] : g >= 1/2,
g(0) = g(h) = 1/2 }: g is extended to period 2h by g(2h - x) := 1 - g(x)
and the coefficient evenly.  This module provides the functional, the
reflection maps and their positivity/chessboard estimates, the inner
profile minimization at fixed h, the outer search for the optimal
half-period h*, the penalized coefficient family F_m with its exact
pointwise gamma update, and Euler-Lagrange diagnostics.

Discretization: n even samples on [0, 2h), forward differences, rectangle
sums, nonlocal term against the certified periodized marginal kernel.  The
free variables are g[1..n/2-1] in [1/2, 1] with both endpoints pinned at
1/2; gradients on the full period are folded back onto the base through the
reflection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as _dc_field

import numpy as np
from scipy.optimize import brentq

from . import kernel as _kernel
from .field import Profile1D
from .model import ModelParams, double_well, double_well_prime


class ConvergenceError(RuntimeError):
    """An iterative minimization did not meet its tolerances."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class CrossingError(ValueError):
    """A required 1/2-level crossing is absent or off-level."""


# ---------------------------------------------------------------------------
# reflections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReflectedProfile:
    """A profile g in C_h sampled at x_j = j h / m for j = 0..m, together
    with its implied 2h-periodic odd reflection about the level 1/2."""

    h: float
    base_g: np.ndarray
    base_gamma: np.ndarray | None = None

    def __post_init__(self):
        g = np.asarray(self.base_g, dtype=float)
        if g.ndim != 1 or g.size < 3:
            raise ValueError("base_g must be a 1D array with >= 3 samples")
        if abs(g[0] - 0.5) > 1e-9 or abs(g[-1] - 0.5) > 1e-9:
            raise ValueError("base profile must have g(0) = g(h) = 1/2")
        if np.any(g < 0.5 - 1e-12) or np.any(g > 1.0 + 1e-12):
            raise ValueError("base profile must take values in [1/2, 1]")
        g = np.clip(g, 0.5, 1.0)
        g.setflags(write=False)
        object.__setattr__(self, "base_g", g)
        if self.base_gamma is not None:
            gam = np.asarray(self.base_gamma, dtype=float)
            if gam.shape != g.shape:
                raise ValueError("base_gamma must match base_g")
            gam.setflags(write=False)
            object.__setattr__(self, "base_gamma", gam)

    @property
    def m(self) -> int:
        return self.base_g.size - 1

    @property
    def n(self) -> int:
        return 2 * self.m

    def full(self) -> Profile1D:
        """The 2h-periodic profile on [0, 2h): G(x) = g(x) on [0, h],
        G(x) = 1 - g(2h - x) on (h, 2h)."""
        m, n = self.m, self.n
        G = np.empty(n)
        G[: m + 1] = self.base_g
        G[m + 1:] = 1.0 - self.base_g[1:m][::-1]
        gam = None
        if self.base_gamma is not None:
            gam = np.empty(n)
            gam[: m + 1] = self.base_gamma
            gam[m + 1:] = self.base_gamma[1:m][::-1]
        return Profile1D(n, 2.0 * self.h, G, gam)


def reflect_periodic(g_base, h: float, gamma_base=None) -> ReflectedProfile:
    """Wrap base samples on [0, h] (endpoints included) into a
    ReflectedProfile."""
    return ReflectedProfile(h, np.asarray(g_base, dtype=float),
                            None if gamma_base is None
                            else np.asarray(gamma_base, dtype=float))


def reflect_left(g: np.ndarray, i0: int, tol: float = 1e-9) -> np.ndarray:
    """Left reflection about grid point i0: keep samples with index <= i0,
    replace the rest of a window of equal width by 1 - g mirrored."""
    if not (0 <= i0 < g.size):
        raise IndexError("i0 out of range")
    if abs(g[i0] - 0.5) > tol:
        raise CrossingError(f"g[i0] = {g[i0]} is not a 1/2-crossing")
    out = np.empty(2 * i0 + 1)
    out[: i0 + 1] = g[: i0 + 1]
    out[i0 + 1:] = 1.0 - g[:i0][::-1]
    return out


def reflect_right(g: np.ndarray, i0: int, tol: float = 1e-9) -> np.ndarray:
    """Right reflection about grid point i0 (mirror image of reflect_left)."""
    if not (0 <= i0 < g.size):
        raise IndexError("i0 out of range")
    if abs(g[i0] - 0.5) > tol:
        raise CrossingError(f"g[i0] = {g[i0]} is not a 1/2-crossing")
    tail = g[i0:]
    out = np.empty(2 * (g.size - 1 - i0) + 1)
    out[g.size - 1 - i0:] = tail
    out[: g.size - 1 - i0] = 1.0 - tail[1:][::-1]
    return out


def reflect_coeff_left(gamma: np.ndarray, i0: int) -> np.ndarray:
    out = np.empty(2 * i0 + 1)
    out[: i0 + 1] = gamma[: i0 + 1]
    out[i0 + 1:] = gamma[:i0][::-1]
    return out


def reflect_coeff_right(gamma: np.ndarray, i0: int) -> np.ndarray:
    tail = gamma[i0:]
    out = np.empty(2 * (gamma.size - 1 - i0) + 1)
    out[gamma.size - 1 - i0:] = tail
    out[: gamma.size - 1 - i0] = tail[1:][::-1]
    return out


# ---------------------------------------------------------------------------
# the 1D functional
# ---------------------------------------------------------------------------

def _gamma_array(gamma, n: int) -> np.ndarray:
    if gamma is None:
        return np.ones(n)
    if np.isscalar(gamma):
        return np.full(n, float(gamma))
    arr = np.asarray(gamma, dtype=float)
    if arr.shape != (n,):
        raise ValueError("gamma must be scalar or match the profile length")
    return arr


def _marginal_per(L: float, n: int, params: ModelParams, tol: float
                  ) -> np.ndarray:
    return _kernel.periodized_marginal(L, n, params, tol=tol)


def _nl_1d(G: np.ndarray, khat: np.ndarray, dx: float) -> float:
    """sum_{x,z} |G(x) - G(x+z)|^2 Khat_per(z) dx^2 by circular FFT."""
    conv = np.fft.irfft(np.fft.rfft(G) * np.fft.rfft(khat), n=G.size)
    return float(2.0 * dx * dx * (np.sum(khat) * np.sum(G ** 2)
                                  - np.sum(G * conv)))


def f1d(gamma, g: Profile1D, params: ModelParams, L: float | None = None,
        tol: float = 1e-7) -> float:
    """The 1D energy per unit length; gamma may be None (== 1), a scalar, or
    an array with +inf entries (infinite entries meeting g' != 0 give +inf).
    """
    if L is None:
        L = g.L
    elif abs(L - g.L) > 1e-12 * max(L, g.L):
        raise ValueError("L does not match the profile period")
    n = g.n
    dx = L / n
    G = g.g
    gam = _gamma_array(gamma if gamma is not None else g.gamma, n)
    D = (np.roll(G, -1) - G) / dx
    alpha = params.alpha
    c = _kernel.c_tau(params)

    inf_mask = np.isinf(gam)
    if np.any(inf_mask & (np.abs(D) > 0.0)):
        return float("inf")
    gam_safe = np.where(inf_mask, 1.0, gam)
    grad_term = np.where(inf_mask, 0.0, gam_safe * D ** 2)
    well_term = np.where(inf_mask, 0.0, double_well(G) / gam_safe)
    local = 3.0 * (c - 1.0) / L * float(
        np.sum(alpha * grad_term + well_term / alpha) * dx)
    khat = _marginal_per(L, n, params, tol)
    return local - _nl_1d(G, khat, dx) / L


def confined_split(gamma, g: Profile1D, params: ModelParams,
                   tol: float = 1e-7) -> tuple[float, float]:
    """Split the 1D energy as term1 + term2 with

        term1 = (3/L) (C_tau/2 - 1) int [ alpha gamma |g'|^2 + W/(alpha gamma) ]
        term2 = (3/(2L)) C_tau int [ same ] - NL/L.

    For profiles confined to one side of 1/2 both parts are nonnegative once
    tau is small; returned for direct inspection.
    """
    L, n = g.L, g.n
    dx = L / n
    G = g.g
    gam = _gamma_array(gamma, n)
    D = (np.roll(G, -1) - G) / dx
    alpha = params.alpha
    c = _kernel.c_tau(params)
    local_int = float(np.sum(alpha * gam * D ** 2
                             + double_well(G) / (alpha * gam)) * dx)
    khat = _marginal_per(L, n, params, tol)
    nl = _nl_1d(G, khat, dx)
    term1 = 3.0 / L * (0.5 * c - 1.0) * local_int
    term2 = 1.5 * c / L * local_int - nl / L
    return term1, term2


# ---------------------------------------------------------------------------
# reflection positivity and the chessboard estimate
# ---------------------------------------------------------------------------

def _quad_form(f: np.ndarray, x: np.ndarray, params: ModelParams) -> float:
    """sum_{i,j} f_i f_j Khat_tau(x_i - x_j) dx^2 with the open-line kernel."""
    dx = x[1] - x[0]
    kmat = _kernel.marginal_kernel(x[:, None] - x[None, :], params)
    return float(f @ kmat @ f) * dx * dx


def reflection_positivity_check(g: Profile1D, x0: float, params: ModelParams,
                                N: int = 2, tol: float = 1e-9
                                ) -> tuple[float, float, float]:
    """Check that reflecting at a 1/2-crossing does not increase the
    nonlocal quadratic form on the window [-N L, N L]:

        Q(g - 1/2)  >=  1/2 [ Q(theta_l g - 1/2) + Q(theta_r g - 1/2) ],

    each side evaluated on its own (reflected) window against the open-line
    marginal kernel.  Returns (lhs, rhs, gap = lhs - rhs), gap >= -tol
    expected for every crossing.
    """
    L, n = g.L, g.n
    dx = L / n
    i0_local = int(round(x0 / dx))
    if abs(i0_local * dx - x0) > 1e-9 * L:
        raise ValueError("x0 must lie on the sample grid")
    if abs(g.g[i0_local % n] - 0.5) > tol:
        raise CrossingError(f"g(x0) = {g.g[i0_local % n]} != 1/2")

    # window [-N L, N L) by periodic extension, crossing at index i0
    reps = 2 * N
    G = np.tile(g.g, reps)
    x = -N * L + np.arange(reps * n) * dx
    i0 = N * n + i0_local

    f = G - 0.5
    lhs = _quad_form(f, x, params)

    gl = reflect_left(G, i0, tol=tol)
    xl = x[0] + np.arange(gl.size) * dx
    gr = reflect_right(G, i0, tol=tol)
    xr = x[i0] - (G.size - 1 - i0) * dx + np.arange(gr.size) * dx
    rhs = 0.5 * (_quad_form(gl - 0.5, xl, params)
                 + _quad_form(gr - 0.5, xr, params))
    return lhs, rhs, lhs - rhs


def chessboard_check(gamma, g: np.ndarray, crossings, params: ModelParams,
                     x_grid: np.ndarray | None = None, tol: float = 1e-7
                     ) -> tuple[float, float, float]:
    """Chessboard estimate on a window [x_1, x_{m+1}] split at interior
    1/2-crossings x_1 < ... < x_{m+1} into one-signed arcs g_k:

        |I| * F1d(reflection of the whole window)
            >= sum_k h_k * F1d(reflection of arc k),   h_k = x_{k+1} - x_k.

    ``g`` (and optionally ``gamma``) are samples on a uniform grid spanning
    the window endpoints inclusively; crossings must lie on the grid.
    Returns (lhs, rhs, gap).
    """
    g = np.asarray(g, dtype=float)
    M = g.size - 1
    if x_grid is None:
        x_grid = np.linspace(crossings[0], crossings[-1], M + 1)
    dx = x_grid[1] - x_grid[0]
    width = x_grid[-1] - x_grid[0]
    gam = _gamma_array(gamma, M + 1)

    idx = []
    for xc in crossings:
        i = int(round((xc - x_grid[0]) / dx))
        if abs(x_grid[0] + i * dx - xc) > 1e-9 * width:
            raise CrossingError(f"crossing {xc} is off the grid")
        if abs(g[i] - 0.5) > 1e-7:
            raise CrossingError(f"g({xc}) = {g[i]} != 1/2")
        idx.append(i)
    if idx[0] != 0 or idx[-1] != M or len(idx) < 2:
        raise CrossingError("crossings must span the window")

    def _periodic_value(arc_g: np.ndarray, arc_gam: np.ndarray,
                        h_k: float) -> float:
        arc = arc_g if np.all(arc_g >= 0.5 - 1e-7) else 1.0 - arc_g
        arc = np.clip(arc, 0.5, 1.0)
        arc = arc.copy()
        arc[0] = arc[-1] = 0.5
        prof = ReflectedProfile(h_k, arc, arc_gam).full()
        return f1d(prof.gamma, prof, params, tol=tol)

    # left side: odd reflection of the whole window to period 2|I|
    G_full = np.concatenate([g[:-1], 1.0 - g[1:][::-1]])
    gam_full = np.concatenate([gam[:-1], gam[1:][::-1]])
    prof_full = Profile1D(2 * M, 2.0 * width, np.clip(G_full, 0.0, 1.0),
                          None)
    lhs = width * f1d(gam_full, prof_full, params, tol=tol)

    rhs = 0.0
    for k in range(len(idx) - 1):
        i, j = idx[k], idx[k + 1]
        if j - i < 2:
            raise CrossingError("arcs must contain at least one interior "
                                "sample")
        h_k = x_grid[j] - x_grid[i]
        sign_vals = g[i:j + 1] - 0.5
        if np.any(sign_vals > 1e-7) and np.any(sign_vals < -1e-7):
            raise CrossingError("arc is not one-signed about 1/2")
        rhs += h_k * _periodic_value(g[i:j + 1], gam[i:j + 1], h_k)
    return lhs, rhs, lhs - rhs


# ---------------------------------------------------------------------------
# inner minimization over C_h at fixed half-period
# ---------------------------------------------------------------------------

@dataclass
class MinimizeOptions:
    max_iter: int = 20000
    tol_energy: float = 1e-13
    tol_grad: float = 1e-7
    step0: float = 1.0
    trace_every: int = 50


@dataclass(frozen=True)
class MinimizeProfileResult:
    profile: ReflectedProfile
    value: float
    iterations: int
    trace: tuple  # (iteration, energy, step) triples


_ACTIVE_TOL = 1e-12


def _full_from_base(gb: np.ndarray, m: int) -> np.ndarray:
    G = np.empty(2 * m)
    G[: m + 1] = gb
    G[m + 1:] = 1.0 - gb[1:m][::-1]
    return G


def _fold_grad(grad_G: np.ndarray, m: int) -> np.ndarray:
    """Chain rule through the reflection: d/d g_j acts on G_j with weight 1
    and on G_{n-j} with weight -1 (interior base points only)."""
    n = grad_G.size
    gb = np.empty(m + 1)
    gb[0] = gb[m] = 0.0
    j = np.arange(1, m)
    gb[1:m] = grad_G[j] - grad_G[n - j]
    return gb


class _ProfileObjective:
    """Energy and gradient of G -> f1d(gamma, G) * 2h, reduced to the base."""

    def __init__(self, params: ModelParams, h: float, n: int,
                 tol: float = 1e-8):
        if n % 2:
            raise ValueError("n must be even")
        self.params = params
        self.h = h
        self.n = n
        self.m = n // 2
        self.dx = 2.0 * h / n
        self.alpha = params.alpha
        self.c = _kernel.c_tau(params)
        self.khat = _marginal_per(2.0 * h, n, params, tol)
        self.ksum = float(np.sum(self.khat))
        self.fk = np.fft.rfft(self.khat)
        self.A = 3.0 * (self.c - 1.0) * self.alpha / (2.0 * h)
        self.B = 3.0 * (self.c - 1.0) / ((2.0 * h) * self.alpha)

    def conv(self, G: np.ndarray) -> np.ndarray:
        return np.fft.irfft(np.fft.rfft(G) * self.fk, n=self.n)

    def energy(self, G: np.ndarray, gamma: np.ndarray | None = None
               ) -> float:
        D = (np.roll(G, -1) - G) / self.dx
        gam = np.ones(self.n) if gamma is None else gamma
        loc = (self.A * float(np.sum(gam * D ** 2) * self.dx)
               + self.B * float(np.sum(double_well(G) / gam) * self.dx))
        conv = self.conv(G)
        nl = 2.0 * self.dx * self.dx * (self.ksum * np.sum(G ** 2)
                                        - np.sum(G * conv)) / (2.0 * self.h)
        return loc - float(nl)

    def grad(self, G: np.ndarray, gamma: np.ndarray | None = None
             ) -> np.ndarray:
        D = (np.roll(G, -1) - G) / self.dx
        gam = np.ones(self.n) if gamma is None else gamma
        gD = gam * D
        grad = (self.A * 2.0 * (np.roll(gD, 1) - gD)
                + self.B * double_well_prime(G) / gam * self.dx)
        conv = self.conv(G)
        grad -= (4.0 * self.dx * self.dx / (2.0 * self.h)) \
            * (self.ksum * G - conv)
        return grad

    def i_g(self, G: np.ndarray) -> np.ndarray:
        """Lattice I_g(x) = sum_z (G(x+z) - G(x)) Khat_per(z) dx."""
        return self.dx * (self.conv(G) - self.ksum * G)


def _initial_base(h: float, m: int, alpha: float) -> np.ndarray:
    x = np.linspace(0.0, h, m + 1)
    w = max(3.0 * alpha, 2.0 * h / (2 * m))
    ramp = np.minimum(np.minimum(x, h - x) / w, 1.0)
    g0 = 0.5 + 0.5 * ramp
    g0[0] = g0[-1] = 0.5
    return g0


def minimize_profile(params: ModelParams, h: float, n: int = 512,
                     opts: MinimizeOptions | None = None,
                     g0_base: np.ndarray | None = None,
                     gamma: np.ndarray | None = None,
                     objective: _ProfileObjective | None = None
                     ) -> MinimizeProfileResult:
    """Projected-gradient minimization of the gamma = 1 energy over C_h.

    Box constraints [1/2, 1] on the interior base samples, endpoints pinned
    at 1/2, backtracking line search on the exact energy, step growth on
    success.  Raises ConvergenceError (with trace) if the tolerances are not
    met within max_iter.
    """
    if n < 32:
        raise ValueError("n must be >= 32")
    opts = opts or MinimizeOptions()
    obj = objective or _ProfileObjective(params, h, n)
    m = obj.m
    gb = (np.asarray(g0_base, dtype=float).copy() if g0_base is not None
          else _initial_base(h, m, params.alpha))
    G = _full_from_base(gb, m)
    e = obj.energy(G, gamma)
    step = opts.step0
    trace = [(0, e, step)]
    gnorm = np.inf
    stall = 0
    converged = False
    gb_prev = None
    grad_prev = None
    for it in range(1, opts.max_iter + 1):
        grad_b = _fold_grad(obj.grad(G, gamma), m)
        if gb_prev is not None:
            # spectral (Barzilai-Borwein) trial step, safeguarded by the
            # monotone backtracking below
            s = gb - gb_prev
            y = grad_b - grad_prev
            sy = float(s @ y)
            if sy > 0:
                step = min(max(float(s @ s) / sy, 1e-10), 1e6)
        gb_prev, grad_prev = gb.copy(), grad_b.copy()
        # projected gradient (zero where the box constraint is active);
        # the active test carries a small tolerance so samples parked at a
        # bound up to rounding count as constrained
        pg = grad_b.copy()
        pg[(gb <= 0.5 + _ACTIVE_TOL) & (pg > 0)] = 0.0
        pg[(gb >= 1.0 - _ACTIVE_TOL) & (pg < 0)] = 0.0
        gnorm = float(np.max(np.abs(pg)))
        if gnorm < opts.tol_grad:
            converged = True
            break
        accepted = False
        for _ in range(60):
            cand = np.clip(gb - step * grad_b, 0.5, 1.0)
            cand[cand >= 1.0 - _ACTIVE_TOL] = 1.0
            cand[cand <= 0.5 + _ACTIVE_TOL] = 0.5
            cand[0] = cand[-1] = 0.5
            Gc = _full_from_base(cand, m)
            ec = obj.energy(Gc, gamma)
            if ec < e:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # exact stall of the line search: accept only a small gradient
            converged = gnorm < 1e4 * opts.tol_grad
            break
        stall = stall + 1 if e - ec < opts.tol_energy else 0
        gb, G, e = cand, Gc, ec
        step = min(step * 1.5, 1e6)
        if it % opts.trace_every == 0:
            trace.append((it, e, step))
        if stall >= 25:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"no convergence in {it} iterations (grad {gnorm:.2e})", trace)
    trace.append((len(trace) * opts.trace_every, e, step))
    prof = ReflectedProfile(h, gb)
    value = f1d(gamma, prof.full(), params)
    return MinimizeProfileResult(prof, value, it, tuple(trace))


@dataclass(frozen=True)
class PeriodSearchResult:
    h_star: float
    c_star: float
    profile: ReflectedProfile
    trace: tuple  # (h, value) pairs

    def to_json(self) -> str:
        return json.dumps({"h_star": self.h_star, "c_star": self.c_star,
                           "trace": [list(t) for t in self.trace]})


def optimal_period(params: ModelParams,
                   h_range: tuple[float, float] = (0.2, 50.0),
                   grid: int = 12, tol: float = 1e-3, n: int = 512,
                   opts: MinimizeOptions | None = None) -> PeriodSearchResult:
    """Minimize h -> min_{g in C_h} F1d(1, g) by a logarithmic scan followed
    by golden section; ties break toward smaller h."""
    lo, hi = h_range
    if not (0 < lo < hi):
        raise ValueError("need 0 < lo < hi")
    trace = []
    cache: dict[float, MinimizeProfileResult] = {}

    def val(h: float) -> float:
        if h not in cache:
            cache[h] = minimize_profile(params, h, n=n, opts=opts)
            trace.append((h, cache[h].value))
        return cache[h].value

    hs = np.geomspace(lo, hi, grid)
    vals = [val(h) for h in hs]
    i = int(np.argmin(vals))
    if i == 0 or i == grid - 1:
        raise ConvergenceError("no interior minimum over the h range", trace)

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = hs[i - 1], hs[i + 1]
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = val(x1), val(x2)
    while (b - a) > tol * b:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = val(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = val(x2)
    h_star = a if val(a) <= val(b) else b
    res = cache[h_star]
    return PeriodSearchResult(h_star, res.value, res.profile, tuple(trace))


def write_trace_csv(path, trace, header: str = "h,value") -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in trace:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Euler-Lagrange diagnostics
# ---------------------------------------------------------------------------

def i_g(g, x, params: ModelParams, tol: float = 1e-8) -> float:
    """I_g(x) = int (phi[g](y) - phi[g](x)) Khat_tau(y - x) dy at a grid
    point, via the periodized marginal (the far field enters through the
    periodization)."""
    prof = g.full() if isinstance(g, ReflectedProfile) else g
    L, n = prof.L, prof.n
    dx = L / n
    j = int(round(x / dx)) % n
    if abs((x / dx) - round(x / dx)) > 1e-9 * n:
        raise ValueError("x must lie on the sample grid")
    khat = _marginal_per(L, n, params, tol)
    G = prof.g
    conv = np.fft.irfft(np.fft.rfft(G) * np.fft.rfft(khat), n=n)
    return float(dx * (conv[j] - np.sum(khat) * G[j]))


def i_g_profile(g, params: ModelParams, tol: float = 1e-8) -> np.ndarray:
    prof = g.full() if isinstance(g, ReflectedProfile) else g
    L, n = prof.L, prof.n
    dx = L / n
    khat = _marginal_per(L, n, params, tol)
    G = prof.g
    conv = np.fft.irfft(np.fft.rfft(G) * np.fft.rfft(khat), n=n)
    return dx * (conv - np.sum(khat) * G)


OBSTACLE_TOL = 10 * np.finfo(float).eps * 1e3


def obstacle_set(G: np.ndarray, tol: float = OBSTACLE_TOL) -> np.ndarray:
    return G > 1.0 - tol


def free_boundary_points(g, tol: float = OBSTACLE_TOL
                         ) -> tuple[float, float] | None:
    """(xbar1, xbar2): boundary of the contact set {g = 1} inside the first
    half-period, or None when the obstacle is never touched."""
    prof = g.full() if isinstance(g, ReflectedProfile) else g
    n = prof.n
    dx = prof.L / n
    half = prof.g[: n // 2 + 1]
    on = np.nonzero(obstacle_set(half, tol))[0]
    if on.size == 0:
        return None
    return float(on[0] * dx), float(on[-1] * dx)


@dataclass(frozen=True)
class ELDiagnostics:
    residual: np.ndarray          # stationarity residual, NaN off {g < 1-d}
    max_abs_residual: float
    ineq_min: float               # min of (lhs - rhs) of the global form
    first_integral_gap4: float    # variation of the factor-4 invariant
    first_integral_gap2: float    # variation of the factor-2 invariant
    gamma1_margin: float
    gamma2_gap: float
    gamma3_ok: bool
    xbar: tuple[float, float] | None

    def to_json(self) -> str:
        return json.dumps({
            "max_abs_residual": self.max_abs_residual,
            "ineq_min": self.ineq_min,
            "first_integral_gap4": self.first_integral_gap4,
            "first_integral_gap2": self.first_integral_gap2,
            "gamma1_margin": self.gamma1_margin,
            "gamma2_gap": self.gamma2_gap,
            "gamma3_ok": self.gamma3_ok,
            "xbar": list(self.xbar) if self.xbar else None,
        })


def el_residual(gamma, g, params: ModelParams, delta_el: float = 0.05,
                tol: float = 1e-8) -> ELDiagnostics:
    """Stationarity diagnostics for a candidate minimizer (gamma, g):

    - residual of 3 (C-1) alpha (gamma g')' = 3 (C-1) W'(g)/(2 gamma alpha)
      + 2 I_g on {g < 1 - delta_el} (centered divided differences of the
      half-point products gamma g');
    - the same relation as a global inequality (>=, one-sided on the
      obstacle);
    - constancy of the first integral
      3 (C-1) [alpha gamma^2 |g'|^2 - W(g)/alpha] - c int gamma g' I_g
      for both written factors c = 4 and c = 2;
    - the pointwise optimal-coefficient conditions.
    """
    prof = g.full() if isinstance(g, ReflectedProfile) else g
    L, n = prof.L, prof.n
    dx = L / n
    G = prof.g
    gam = _gamma_array(gamma, n)
    alpha = params.alpha
    c = _kernel.c_tau(params)
    pref = 3.0 * (c - 1.0)

    # node-centered stencil, deliberately independent of the minimizer's
    # staggered discretization so the residual measures consistency with
    # the continuum equation rather than echoing the solver
    D = (np.roll(G, -1) - G) / dx                     # half-point gradients
    Dc = (np.roll(G, -1) - np.roll(G, 1)) / (2.0 * dx)
    prod = gam * Dc
    div = (np.roll(prod, -1) - np.roll(prod, 1)) / (2.0 * dx)
    ig = i_g_profile(prof, params, tol)
    lhs = pref * alpha * div
    rhs = pref * double_well_prime(G) / (2.0 * gam * alpha) + 2.0 * ig
    res = lhs - rhs

    # the equation holds strictly between the two obstacles; on the full
    # period the contact sets are {g = 1} and its mirror image {g = 0}
    interior = (G < 1.0 - delta_el) & (G > delta_el)
    res_interior = np.where(interior, res, np.nan)
    max_res = float(np.nanmax(np.abs(res_interior))) if interior.any() \
        else 0.0
    # one-sided multiplier signs on the contact sets: res >= 0 on {g = 1},
    # res <= 0 on the mirrored set {g = 0}
    hi, lo = G >= 1.0 - delta_el, G <= delta_el
    sides = np.concatenate([res[hi], -res[lo]])
    ineq_min = float(np.min(sides)) if sides.size else 0.0

    # first integral on {g != 1}
    D_node = 0.5 * (D + np.roll(D, 1))
    phi = pref * (alpha * gam ** 2 * D_node ** 2 - double_well(G) / alpha)
    flux = np.cumsum(gam * D_node * ig) * dx
    notobs = ~obstacle_set(G)
    gaps = []
    for fac in (4.0, 2.0):
        psi = phi - fac * flux
        vals = psi[notobs]
        gaps.append(float(np.max(vals) - np.min(vals)) if vals.size else 0.0)

    finite = np.isfinite(gam)
    gam1 = gam <= 1.0 + 1e-9
    active = gam1 & interior
    margin = float(np.min((alpha * D_node ** 2 - double_well(G) / alpha)
                          [active])) if active.any() else np.inf
    mid = finite & ~gam1
    gap2 = float(np.max(np.abs((alpha * gam ** 2 * D_node ** 2
                                - double_well(G) / alpha)[mid]))) \
        if mid.any() else 0.0
    inf_mask = ~finite & (G < 1.0 - OBSTACLE_TOL)
    gamma3_ok = bool(np.all(np.abs(D_node[inf_mask]) < 1e-9)) \
        if inf_mask.any() else True

    return ELDiagnostics(
        residual=res_interior, max_abs_residual=max_res, ineq_min=ineq_min,
        first_integral_gap4=gaps[0], first_integral_gap2=gaps[1],
        gamma1_margin=margin, gamma2_gap=gap2, gamma3_ok=gamma3_ok,
        xbar=free_boundary_points(prof))


# ---------------------------------------------------------------------------
# penalized coefficient family
# ---------------------------------------------------------------------------

def gamma_pointwise_optimum(a: float, b: float, m: float, w: float) -> float:
    """argmin over gamma in [1, inf) of a gamma + b / gamma
    + w (gamma - m)_+^2 (a, b >= 0; m >= 1; w > 0 unless a > 0)."""
    if a < 0 or b < 0 or m < 1:
        raise ValueError("need a, b >= 0 and m >= 1")
    if w <= 0 and a <= 0 and b > 0:
        raise ValueError("objective unbounded below in gamma")

    def q(x):
        return a * x + b / x + w * max(x - m, 0.0) ** 2

    # piece [1, m]: stationary point sqrt(b/a)
    if a > 0:
        c1 = min(max(np.sqrt(b / a), 1.0), m)
    else:
        c1 = m if b > 0 else 1.0
    best_x, best_v = c1, q(c1)

    # piece [m, inf): root of 2 w x^3 + (a - 2 w m) x^2 - b = 0
    if w > 0:
        def dq(x):
            return a - b / x ** 2 + 2.0 * w * (x - m)
        if dq(m) < 0:
            hi = m + 1.0
            while dq(hi) < 0:
                hi *= 2.0
            c2 = brentq(dq, m, hi, xtol=1e-14, rtol=1e-14)
            v2 = q(c2)
            if v2 < best_v - 0.0 or (v2 == best_v and c2 < best_x):
                best_x, best_v = c2, v2
    elif a > 0:
        c2 = np.sqrt(b / a)
        if c2 > m and q(c2) < best_v:
            best_x = c2
    return float(best_x)


def minimize_aux_penalized(m: float, params: ModelParams, h: float,
                           n: int = 512, opts: MinimizeOptions | None = None,
                           outer_iter: int = 60, tol_outer: float = 1e-11
                           ) -> tuple[Profile1D, Profile1D, float]:
    """Alternating minimization of the penalized energy
    F_m(gamma, g) = F(gamma, g) + (1/(4h)) int (gamma - m)_+^2:
    exact pointwise gamma update, projected descent in g at frozen gamma.

    Returns (gamma_m, g_m, value) as full-period profiles.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    opts = opts or MinimizeOptions()
    obj = _ProfileObjective(params, h, n)
    mm = obj.m
    dx = obj.dx
    gb = _initial_base(h, mm, params.alpha)
    gamma_full = np.ones(n)

    def penalty(gamma_full):
        return float(np.sum(np.maximum(gamma_full - m, 0.0) ** 2) * dx
                     / (4.0 * h))

    prev = np.inf
    value = np.inf
    for _ in range(outer_iter):
        res = minimize_profile(params, h, n=n, opts=opts, g0_base=gb,
                               gamma=gamma_full, objective=obj)
        gb = res.profile.base_g.copy()
        G = _full_from_base(gb, mm)
        D = (np.roll(G, -1) - G) / dx
        a_w = obj.A * D ** 2 * dx
        b_w = obj.B * double_well(G) * dx
        w = dx / (4.0 * h)
        gamma_full = np.array([gamma_pointwise_optimum(a_w[j], b_w[j], m, w)
                               for j in range(n)])
        # keep the coefficient in the reflection class
        half = gamma_full[: mm + 1]
        mirror = np.concatenate([half, half[1:mm][::-1]])
        gamma_full = 0.5 * (gamma_full + mirror)
        value = obj.energy(G, gamma_full) + penalty(gamma_full)
        if prev - value < tol_outer:
            break
        prev = value
    gam_prof = Profile1D(n, 2.0 * h, np.clip(G, 0.0, 1.0), gamma_full)
    e_final = f1d(gamma_full, gam_prof, params) + penalty(gamma_full)
    return (gam_prof, Profile1D(n, 2.0 * h, np.clip(G, 0.0, 1.0)),
            float(e_final))


def gamma_limit_study(params: ModelParams, h: float, m_schedule=(1, 10, 100),
                      n: int = 512, gamma_tol: float = 0.01,
                      delta: float = 0.05) -> dict:
    """Run the penalized family along ``m_schedule`` and report how far the
    optimal coefficients sit from 1 and the strict-inequality margin."""
    report = {"m": [], "value": [], "sup_gamma_minus_1": [],
              "measure_gamma_above": []}
    last = None
    for m in m_schedule:
        gam_prof, g_prof, value = minimize_aux_penalized(m, params, h, n=n)
        gam = gam_prof.gamma
        dx = 2.0 * h / n
        report["m"].append(m)
        report["value"].append(value)
        report["sup_gamma_minus_1"].append(float(np.max(gam) - 1.0))
        report["measure_gamma_above"].append(
            float(np.sum(gam > 1.0 + gamma_tol) * dx))
        last = (gam_prof, g_prof)
    gam_prof, g_prof = last
    G = g_prof.g
    dx = 2.0 * h / n
    D = (np.roll(G, -1) - G) / dx
    D_node = 0.5 * (D + np.roll(D, 1))
    alpha = params.alpha
    # the strict inequality concerns the base half-period, where g takes
    # values in [1/2, 1]; the mirrored half repeats it through g -> 1 - g
    base = np.zeros(n, dtype=bool)
    base[: n // 2 + 1] = True
    sel = base & (G < 1.0 - delta)
    margin = float(np.min((alpha * gam_prof.gamma[sel] ** 2
                           * D_node[sel] ** 2
                           - double_well(G[sel]) / alpha))) if sel.any() \
        else np.inf
    report["strict_margin"] = margin
    report["xbar"] = free_boundary_points(g_prof)
    report["grid_cell"] = dx
    return report
