"""Cutoff functions, dyadic/cone decompositions, and derived symbols.

Everything here is built from one frozen smooth step: the exponential splice

    s(u) = g(1-u) / (g(u) + g(1-u)),   g(u) = exp(-1/u) for u > 0, else 0,

which is 1 for u <= 0, 0 for u >= 1, and infinitely differentiable.  The
radial profile ``varphi`` equals 1 on [-1,1], 0 outside (-2,2), and
varphi(1.5) = 0.5 by the symmetry of s about u = 1/2.  All derived constants
in the test suite assume this exact profile.

The module provides dyadic annuli phi_j, cone cutoffs delta_ell on the ratio
|xi2|/|xi1| (with tail-absorbing end indices so the family sums to 1 for every
frequency, including the axes), a cube partition of unity, band-limited
mollifiers that majorize 1 on a cube, and ``derived_symbol`` which composes a
parent symbol with these cutoffs (annulus, cone, flat/sharp cone sums,
low/high frequency split, and the multiplication-commutator symbol).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DyadicCube, GridSpec, SampledField
from .symbols import SymbolDescriptor, make_symbol

DERIVED_KINDS = ("annulus_j", "cone_lj", "flat_j", "sharp_j", "low_r", "high_r", "theta")


def smooth_step(u):
    """The frozen transition: 1 for u <= 0, 0 for u >= 1, strictly monotone between."""
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    out = np.where(u <= 0.0, 1.0, 0.0)
    mid = (u > 0.0) & (u < 1.0)
    if np.any(mid):
        um = u[mid]
        ga = np.exp(-1.0 / um)
        gb = np.exp(-1.0 / (1.0 - um))
        out[mid] = gb / (ga + gb)
    return float(out[0]) if scalar else out


def varphi(t):
    """Radial bump: 1 on |t| <= 1, 0 for |t| >= 2, smooth splice between."""
    return smooth_step(np.abs(np.asarray(t, dtype=float)) - 1.0)


def _block_norms(xi, n1: int, n2: int):
    xi = np.asarray(xi, dtype=float)
    r1 = np.sqrt(np.sum(xi[..., :n1] ** 2, axis=-1))
    r2 = np.sqrt(np.sum(xi[..., n1:n1 + n2] ** 2, axis=-1))
    return r1, r2


def phi_j_radial(norm, j: int):
    """Dyadic annulus weight as a function of |xi|."""
    if j < 0:
        raise ValueError(f"dyadic index must be nonnegative, got {j}")
    norm = np.asarray(norm, dtype=float)
    if j == 0:
        return varphi(norm)
    return varphi(norm * 2.0 ** (-j)) - varphi(norm * 2.0 ** (-j + 1))


def phi_j(xi, j: int):
    """Dyadic annulus weight of a frequency vector (last axis = components)."""
    xi = np.asarray(xi, dtype=float)
    return phi_j_radial(np.sqrt(np.sum(xi ** 2, axis=-1)), j)


def _delta_from_norms(r1, r2, ell: int, ell_max: int):
    """Cone cutoff as a function of the block norms |xi1|, |xi2|.

    The ratio |xi2|/|xi1| is +inf on the xi1 = 0 lines (absorbed by the top
    index) and the origin is assigned to ell = 0 by convention.  The family
    over ell in [-ell_max, ell_max] sums to 1 exactly by telescoping.
    """
    if ell_max < 1:
        raise ValueError(f"ell_max must be >= 1, got {ell_max}")
    if abs(ell) > ell_max:
        raise ValueError(f"|ell| = {abs(ell)} exceeds ell_max = {ell_max}")
    scalar = np.ndim(r1) == 0 and np.ndim(r2) == 0
    r1 = np.atleast_1d(np.asarray(r1, dtype=float))
    r2 = np.atleast_1d(np.asarray(r2, dtype=float))
    r1, r2 = np.broadcast_arrays(r1, r2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = r2 / r1
    both_zero = (r1 == 0.0) & (r2 == 0.0)
    # any finite placeholder; overwritten below
    safe = np.where(both_zero, 1.0, ratio)
    if ell == ell_max:
        val = 1.0 - varphi(safe * 2.0 ** (-ell_max + 1))
    elif ell == -ell_max:
        val = varphi(safe * 2.0 ** ell_max)
    else:
        val = varphi(safe * 2.0 ** (-ell)) - varphi(safe * 2.0 ** (-ell + 1))
    out = np.where(both_zero, 1.0 if ell == 0 else 0.0, val)
    return float(out[0]) if scalar else out


def delta_ell(xi1, xi2, ell: int, ell_max: int):
    """Cone cutoff evaluated on frequency blocks (last axis = components)."""
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    r1 = np.sqrt(np.sum(xi1 ** 2, axis=-1))
    r2 = np.sqrt(np.sum(xi2 ** 2, axis=-1))
    return _delta_from_norms(r1, r2, ell, ell_max)


def _cone_sharp_sum(r1, r2, j: int, ell_max: int):
    """Closed form of sum_{ell=-ell_max}^{j} delta_ell via telescoping."""
    if j >= ell_max:
        return np.ones(np.broadcast(np.asarray(r1), np.asarray(r2)).shape)
    scalar = np.ndim(r1) == 0 and np.ndim(r2) == 0
    r1 = np.atleast_1d(np.asarray(r1, dtype=float))
    r2 = np.atleast_1d(np.asarray(r2, dtype=float))
    r1, r2 = np.broadcast_arrays(r1, r2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = r2 / r1
    both_zero = (r1 == 0.0) & (r2 == 0.0)
    safe = np.where(both_zero, 1.0, ratio)
    val = varphi(safe * 2.0 ** (-j))
    out = np.where(both_zero, 1.0 if j >= 0 else 0.0, val)
    return float(out[0]) if scalar else out


def default_ell_max(points_per_axis: int) -> int:
    """Cone truncation index matched to the lattice: log2(N)."""
    return max(1, int(round(np.log2(points_per_axis))))


def cube_partition(x, k):
    """Weight of the unit-lattice cube centered at integer vector k.

    Built from the half-scale profile p(u) = varphi(2u) tensored over axes and
    normalized by the sum over the (at most 3^d) neighboring lattice centers,
    so the weights sum to 1 at every point.  Supported in k + [-1, 1]^d.
    """
    x = np.asarray(x, dtype=float)
    k = np.asarray(k)
    d = x.shape[-1]
    if k.shape != (d,):
        raise ValueError(f"center has shape {k.shape}, expected ({d},)")

    def p0(v):
        return np.prod(varphi(2.0 * v), axis=-1)

    numer = p0(x - k)
    base = np.floor(x)
    denom = np.zeros(numer.shape)
    for off in np.ndindex(*((3,) * d)):
        denom = denom + p0(x - base - (np.asarray(off) - 1))
    return numer / denom


@dataclass(frozen=True)
class DecompositionIndex:
    """Indices selecting a derived piece of a symbol.

    ``j`` is the dyadic scale (a scalar, or a per-factor pair for product
    annuli), ``ell`` the cone index, ``ell_max`` the cone truncation, and
    ``r`` the low/high split scale (also the annulus dilation in cone pieces).
    Only the fields a given kind needs have to be present.
    """

    j: object = None
    ell: int = None
    r: float = None
    ell_max: int = None

    def __post_init__(self):
        if self.j is not None:
            js = self.j if isinstance(self.j, tuple) else (self.j,)
            if any(int(v) != v or v < 0 for v in js):
                raise ValueError(f"j must be nonnegative integer(s), got {self.j}")
        if self.ell_max is not None and self.ell_max < 1:
            raise ValueError(f"ell_max must be >= 1, got {self.ell_max}")
        if self.ell is not None:
            if self.ell_max is None:
                raise ValueError("ell requires ell_max")
            if abs(self.ell) > self.ell_max:
                raise ValueError(f"|ell| = {abs(self.ell)} exceeds ell_max = {self.ell_max}")
        if self.r is not None and not (np.isfinite(self.r) and self.r > 0):
            raise ValueError(f"split scale must be positive, got {self.r}")


def _need(index: DecompositionIndex, kind: str, *fields):
    for f in fields:
        if getattr(index, f) is None:
            raise ValueError(f"derived kind '{kind}' requires index field '{f}'")


def _cut_symbol(sigma: SymbolDescriptor, cut, tag: str) -> SymbolDescriptor:
    """Multiply sigma by a frequency cutoff, propagating separable structure."""
    parent = sigma.evaluator

    def evaluator(x, xi, _p=parent, _c=cut):
        return _p(x, xi) * _c(xi)

    terms = None
    if sigma.separable_terms is not None:
        def wrap(b):
            def bc(xi, _b=b, _c=cut):
                return np.asarray(_b(xi)) * _c(xi)
            return bc
        terms = tuple((a, wrap(b)) for a, b in sigma.separable_terms)
    return make_symbol(
        evaluator, sigma.n1, sigma.n2, order=sigma.order, rho=sigma.rho,
        delta=sigma.delta, separable_terms=terms, name=f"{sigma.name}|{tag}")


def derived_symbol(sigma: SymbolDescriptor, index: DecompositionIndex, kind: str,
                   mollifier=None) -> SymbolDescriptor:
    """Compose a symbol with the decomposition cutoffs.

    Kinds
    -----
    annulus_j : sigma * phi_j(xi); a pair j = (j1, j2) uses per-factor annuli.
    cone_lj   : sigma * phi_j(r xi) * delta_ell(xi), r defaulting to 1.
    flat_j    : the cone pieces with ell > j summed (closed form).
    sharp_j   : the cone pieces with ell <= j summed; sharp + flat equals the
                dilated annulus piece exactly (disjoint split convention).
    low_r     : sigma * varphi(r |xi|).
    high_r    : sigma minus its low part.
    theta     : the symbol of the commutator [lambda, T_sigma] for a
                band-limited mollifier lambda:
                theta(x, xi) = sum_eta beta_eta (sigma(x, xi) - sigma(x, xi + eta))
                               * e^{2 pi i x.eta}
                with beta_eta the Fourier coefficients of lambda.  The shift
                enters as xi + eta: expanding lambda f in modes moves the
                frequency seen by the symbol up by eta, which the difference
                must mirror for the operator identity to be exact.
    """
    if kind not in DERIVED_KINDS:
        raise ValueError(f"unknown derived kind '{kind}'; expected one of {DERIVED_KINDS}")
    n1, n2 = sigma.n1, sigma.n2

    if kind == "annulus_j":
        _need(index, kind, "j")
        j = index.j
        if isinstance(j, tuple):
            if len(j) != 2:
                raise ValueError(f"pair annulus index needs 2 entries, got {j}")
            j1, j2 = int(j[0]), int(j[1])

            def cut(xi, _j1=j1, _j2=j2):
                r1, r2 = _block_norms(xi, n1, n2)
                return phi_j_radial(r1, _j1) * phi_j_radial(r2, _j2)
            tag = f"annulus[{j1},{j2}]"
        else:
            jj = int(j)

            def cut(xi, _j=jj):
                return phi_j(xi, _j)
            tag = f"annulus[{jj}]"
        return _cut_symbol(sigma, cut, tag)

    if kind == "cone_lj":
        _need(index, kind, "j", "ell", "ell_max")
        jj, ell, em = int(index.j), index.ell, index.ell_max
        scale = 1.0 if index.r is None else float(index.r)

        def cut(xi, _j=jj, _l=ell, _m=em, _s=scale):
            xi = np.asarray(xi, dtype=float)
            full = np.sqrt(np.sum(xi ** 2, axis=-1))
            r1, r2 = _block_norms(xi, n1, n2)
            return phi_j_radial(_s * full, _j) * _delta_from_norms(r1, r2, _l, _m)
        return _cut_symbol(sigma, cut, f"cone[{jj},{ell}]")

    if kind in ("flat_j", "sharp_j"):
        _need(index, kind, "j", "ell_max")
        jj, em = int(index.j), index.ell_max
        scale = 1.0 if index.r is None else float(index.r)
        sharp = kind == "sharp_j"

        def cut(xi, _j=jj, _m=em, _s=scale, _sharp=sharp):
            xi = np.asarray(xi, dtype=float)
            full = np.sqrt(np.sum(xi ** 2, axis=-1))
            r1, r2 = _block_norms(xi, n1, n2)
            s = _cone_sharp_sum(r1, r2, _j, _m)
            return phi_j_radial(_s * full, _j) * (s if _sharp else 1.0 - s)
        return _cut_symbol(sigma, cut, f"{'sharp' if sharp else 'flat'}[{jj}]")

    if kind in ("low_r", "high_r"):
        _need(index, kind, "r")
        scale = float(index.r)
        low = kind == "low_r"

        def cut(xi, _s=scale, _low=low):
            xi = np.asarray(xi, dtype=float)
            w = varphi(_s * np.sqrt(np.sum(xi ** 2, axis=-1)))
            return w if _low else 1.0 - w
        return _cut_symbol(sigma, cut, f"{'low' if low else 'high'}[{scale:g}]")

    # theta
    if mollifier is None:
        raise ValueError("derived kind 'theta' requires a mollifier")
    return _theta_symbol(sigma, mollifier)


def _theta_symbol(sigma: SymbolDescriptor, moll: "Mollifier") -> SymbolDescriptor:
    etas = moll.mode_steps / moll.period  # (K, n) physical frequencies
    betas = moll.mode_coeffs
    parent = sigma.evaluator
    n = sigma.n1 + sigma.n2
    if etas.shape[1] != n:
        raise ValueError(f"mollifier has {etas.shape[1]} axes, symbol has {n}")

    def evaluator(x, xi, _p=parent, _e=etas, _b=betas):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        base = _p(x, xi)
        acc = np.zeros(np.broadcast(x[..., 0], xi[..., 0]).shape, dtype=complex)
        for eta, beta in zip(_e, _b):
            if not np.any(eta):
                continue  # eta = 0 term vanishes identically
            shifted = _p(x, xi + eta)
            phase = np.exp(2j * np.pi * np.sum(x * eta, axis=-1))
            acc = acc + beta * (base - shifted) * phase
        return acc

    terms = None
    if sigma.separable_terms is not None:
        terms = []
        for a, b in sigma.separable_terms:
            for eta, beta in zip(etas, betas):
                if not np.any(eta):
                    continue
                def ax(x, _a=a, _eta=eta, _beta=beta):
                    x = np.asarray(x, dtype=float)
                    return _beta * np.asarray(_a(x)) * np.exp(
                        2j * np.pi * np.sum(x * _eta, axis=-1))

                def bx(xi, _b=b, _eta=eta):
                    xi = np.asarray(xi, dtype=float)
                    return np.asarray(_b(xi)) - np.asarray(_b(xi + _eta))
                terms.append((ax, bx))
        terms = tuple(terms)
    return make_symbol(
        evaluator, sigma.n1, sigma.n2, order=sigma.order, rho=sigma.rho,
        delta=sigma.delta, separable_terms=terms, name=f"{sigma.name}|theta")


@dataclass(frozen=True)
class Mollifier:
    """Band-limited majorant of the indicator of a cube.

    ``field`` holds the values on the construction grid; ``mode_steps`` (K, n
    integer rows) and ``mode_coeffs`` give the exact finite Fourier expansion
    lam(x) = sum_k coeffs[k] * e^{2 pi i (steps[k]/L).x}, which the commutator
    symbol consumes.  ``freq_radius`` is the guaranteed support radius of the
    transform.
    """

    field: SampledField
    cube: DyadicCube
    center: tuple
    rho: float
    degree: int
    mode_steps: np.ndarray
    mode_coeffs: np.ndarray
    period: float
    freq_radius: float

    @property
    def is_constant(self) -> bool:
        return self.degree == 0


def _one_sided_fejer_autocorr(M: int) -> np.ndarray:
    """Coefficients c_d of |sum_k (1 - k/(M+1)) z^k|^2, d = 0..M."""
    w = 1.0 - np.arange(M + 1) / (M + 1.0)
    return np.array([np.dot(w[: M + 1 - d], w[d:]) for d in range(M + 1)])


def _axis_profile(c: np.ndarray, u: np.ndarray, period: float) -> np.ndarray:
    """Evaluate c_0 + 2 sum_d c_d cos(2 pi d u / L), the per-axis factor."""
    val = np.full(u.shape, c[0])
    for d in range(1, len(c)):
        val = val + 2.0 * c[d] * np.cos(2.0 * np.pi * d * u / period)
    return val


def mollifier_lambda(grid: GridSpec, Q: DyadicCube, rho: float) -> Mollifier:
    """Construct lambda >= 1 on Q, 0 <= lambda <= 10, with Fourier support
    inside |xi| <= (side length)^(-rho).

    Built as c * prod_a |F(x_a - q_a)|^2 where F is a one-sided Fejer-type
    kernel of the largest per-axis degree M compatible with the support
    constraint (sqrt(n) M / L <= r^(-rho)); M is lowered until the cap
    c * max(lambda) <= 10 holds.  A whole-torus cube returns lambda = 1.
    ``rho = 0`` (or any combination making the support radius smaller than
    2/L) is rejected unless the cube is the whole torus.
    """
    Q.check(grid)
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    N, L, n = grid.points_per_axis, grid.period, grid.n
    step = L / N
    center = tuple((a + Q.side / 2.0) * step for a in Q.anchor)

    if Q.side == N:
        ones = SampledField(grid, np.ones(grid.shape, dtype=complex))
        return Mollifier(ones, Q, center, rho, 0,
                         np.zeros((1, n), dtype=int), np.ones(1, dtype=complex),
                         L, 0.0)

    r_phys = Q.side * step
    radius = r_phys ** (-rho)
    if radius < 2.0 / L - 1e-12:
        raise ValueError(
            f"mollifier support radius {radius:g} below 2/L = {2.0 / L:g}; "
            f"use a larger cube or smaller rho")
    m_cap = min(int(np.floor(L * radius / np.sqrt(n))), N // 2 - 1)
    if m_cap < 1:
        raise ValueError(
            f"no admissible nonconstant frequency content for side {r_phys:g}, "
            f"rho {rho:g} on period {L:g}; use a larger cube or smaller rho")

    half = r_phys / 2.0
    # candidate offsets from the cube center where the >= 1 bound is enforced:
    # every grid offset inside the cube plus a dense sweep of the closed cube
    probe = np.concatenate([
        (np.arange(Q.side) - Q.side / 2.0) * step,
        np.linspace(-half, half, 2049),
    ])
    for M in range(m_cap, 0, -1):
        c_d = _one_sided_fejer_autocorr(M)
        prof = _axis_profile(c_d, probe, L)
        vmin = float(prof.min())
        if vmin <= 0.0:
            continue
        vmax = float(np.sum(c_d[1:]) * 2.0 + c_d[0])  # attained at u = 0
        scale = (1.0 + 1e-9) / vmin ** n
        if scale * vmax ** n <= 10.0:
            break
    else:
        raise ValueError(
            f"mollifier cap 10 unattainable for side {r_phys:g}, rho {rho:g}; "
            f"use a larger cube or smaller rho")

    coords = np.arange(N) * step
    axis_vals = [_axis_profile(c_d, coords - q, L) for q in center]
    vals = np.full((), scale, dtype=float)
    for av in axis_vals:
        vals = np.multiply.outer(vals, av)
    field = SampledField(grid, vals.astype(complex))

    steps = np.stack(np.meshgrid(*([np.arange(-M, M + 1)] * n), indexing="ij"),
                     axis=-1).reshape(-1, n)
    coeffs = np.empty(len(steps), dtype=complex)
    for i, d in enumerate(steps):
        amp = scale * np.prod(c_d[np.abs(d)])
        coeffs[i] = amp * np.exp(-2j * np.pi * np.dot(d, center) / L)
    return Mollifier(field, Q, center, rho, M, steps, coeffs, L,
                     np.sqrt(n) * M / L)
