"""Periodic grids, discrete Fourier transforms, and function-space norms.

The computational domain is the flat torus [0, L)^n with n = n1 + n2 axes,
where the first n1 axes form the first parameter block and the remaining n2
axes the second.  Each axis carries N equispaced samples x = (i/N) L, and
frequencies live on the dual lattice {k/L : k integer, -N/2 <= k < N/2}.

Transforms carry physical quadrature weights so that they approximate their
continuum counterparts:

    forward   fhat(xi) = sum_x f(x) exp(-2 pi i x.xi) (L/N)^n
    inverse   f(x)     = sum_xi fhat(xi) exp(+2 pi i x.xi) (1/L)^n

and ``dft_inverse(dft_forward(f)) == f`` to roundoff.  Norms use the cell
volume (L/N)^n as integration weight.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

FIELD_MAGIC = b"BPDOFLD1"
# magic, n1, n2, N, L, padded to 32 bytes
_FIELD_HEADER = struct.Struct("<8sIIId4x")


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [0, L)^(n1+n2).

    Attributes
    ----------
    n1, n2 : int
        Number of axes in the first and second parameter block.
    points_per_axis : int
        Samples per axis, even and at least 4.
    period : float
        Side length L of the torus.
    """

    n1: int
    n2: int
    points_per_axis: int
    period: float

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.n

    @property
    def size(self) -> int:
        return self.points_per_axis ** self.n

    @property
    def cell_volume(self) -> float:
        return (self.period / self.points_per_axis) ** self.n

    def axis_coords(self) -> np.ndarray:
        """Sample positions along one axis."""
        N = self.points_per_axis
        return np.arange(N) * (self.period / N)

    def axis_freqs(self) -> np.ndarray:
        """Frequencies along one axis, in FFT layout (0, 1, ..., -N/2, ..., -1)/L."""
        N = self.points_per_axis
        return np.fft.fftfreq(N, d=self.period / N)

    def points(self) -> np.ndarray:
        """All grid points, shape (N^n, n), row-major with block-1 axes first."""
        return _points(self)

    def freqs(self) -> np.ndarray:
        """All lattice frequencies, shape (N^n, n), flattened in FFT layout."""
        return _freqs(self)


def make_grid(n1: int, n2: int, points_per_axis: int, period: float = 1.0) -> GridSpec:
    """Validate parameters and build a :class:`GridSpec`.

    Raises
    ------
    ValueError
        If a block is empty, N is odd or below 4, or the period is not positive.
    """
    if not (isinstance(n1, int) and isinstance(n2, int)) or n1 < 1 or n2 < 1:
        raise ValueError(f"block dimensions must be positive integers, got ({n1}, {n2})")
    N = points_per_axis
    if not isinstance(N, int) or N < 4 or N % 2 != 0:
        raise ValueError(f"points_per_axis must be an even integer >= 4, got {N}")
    if not (np.isfinite(period) and period > 0):
        raise ValueError(f"period must be positive and finite, got {period}")
    return GridSpec(n1, n2, N, float(period))


@lru_cache(maxsize=64)
def _points_freqs_cached(n1, n2, N, L):
    n = n1 + n2
    x1 = np.arange(N) * (L / N)
    k1 = np.fft.fftfreq(N, d=L / N)
    pts = np.stack(np.meshgrid(*([x1] * n), indexing="ij"), axis=-1).reshape(-1, n)
    frs = np.stack(np.meshgrid(*([k1] * n), indexing="ij"), axis=-1).reshape(-1, n)
    pts.setflags(write=False)
    frs.setflags(write=False)
    return pts, frs


def _points(grid: GridSpec) -> np.ndarray:
    return _points_freqs_cached(grid.n1, grid.n2, grid.points_per_axis, grid.period)[0]


def _freqs(grid: GridSpec) -> np.ndarray:
    return _points_freqs_cached(grid.n1, grid.n2, grid.points_per_axis, grid.period)[1]


@dataclass(frozen=True)
class SampledField:
    """Complex field sampled on a grid.

    ``values`` has shape ``grid.shape`` (row-major, block-1 axes first); a flat
    array of length N^n is accepted and reshaped.  Frequency-domain fields use
    the same container with values indexed by lattice frequency in FFT layout.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {v.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class DyadicCube:
    """Axis-aligned cube with power-of-two side, in grid units.

    ``anchor`` is the lower corner index per axis and ``side`` the edge length
    in points.  The cube must lie inside one period (no wraparound), which is
    checked against a grid via :meth:`check`.
    """

    anchor: tuple
    side: int

    def __post_init__(self):
        s = self.side
        if s < 1 or (s & (s - 1)) != 0:
            raise ValueError(f"side must be a positive power of two, got {s}")
        if any(a < 0 for a in self.anchor):
            raise ValueError(f"anchor must be nonnegative, got {self.anchor}")

    def check(self, grid: GridSpec) -> None:
        if len(self.anchor) != grid.n:
            raise ValueError(f"anchor has {len(self.anchor)} axes, grid has {grid.n}")
        N = grid.points_per_axis
        if self.side > N or any(a + self.side > N for a in self.anchor):
            raise ValueError(f"cube {self.anchor}+{self.side} leaves the period (N={N})")

    def slices(self) -> tuple:
        return tuple(slice(a, a + self.side) for a in self.anchor)


def dft_forward(f: SampledField) -> SampledField:
    """Forward transform with quadrature weight (L/N)^n."""
    return SampledField(f.grid, np.fft.fftn(f.values) * f.grid.cell_volume)


def dft_inverse(fhat: SampledField) -> SampledField:
    """Inverse transform with weight (1/L)^n per lattice frequency."""
    g = fhat.grid
    scale = (g.points_per_axis / g.period) ** g.n
    return SampledField(g, np.fft.ifftn(fhat.values) * scale)


def lp_norm(f: SampledField, p: float) -> float:
    """Discrete L^p norm with cell-volume weight; p = inf gives the sup norm."""
    a = np.abs(f.values)
    if np.isinf(p):
        return float(a.max())
    if p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    return float((np.sum(a ** p) * f.grid.cell_volume) ** (1.0 / p))


def linf_norm(f: SampledField) -> float:
    return lp_norm(f, np.inf)


def _box_means(v: np.ndarray, side: int) -> np.ndarray:
    """Mean over the cube anchored at each index (periodic), all axes."""
    out = v
    for ax in range(v.ndim):
        acc = out.copy()
        for t in range(1, side):
            acc += np.roll(out, -t, axis=ax)
        out = acc
    return out / float(side ** v.ndim)


def bmo_norm(f: SampledField) -> float:
    """Mean-oscillation norm over periodic dyadic cubes.

    The cube family contains every axis-aligned cube whose side is a power of
    two (2, 4, ..., N points), anchored at every lattice position and wrapping
    periodically.  For each cube Q the oscillation is the cube average of
    |f - f_Q| (modulus for complex fields), and the norm is the sup over the
    family.  Closure of the family under lattice shifts makes the value exactly
    invariant under periodic translation, and invariant under adding constants.
    """
    v = f.values
    n = v.ndim
    best = 0.0
    side = 2
    while side <= f.grid.points_per_axis:
        means = _box_means(v, side)
        acc = np.zeros(v.shape, dtype=float)
        for offset in np.ndindex(*((side,) * n)):
            if any(offset):
                shifted = np.roll(v, tuple(-o for o in offset), axis=tuple(range(n)))
            else:
                shifted = v
            acc += np.abs(shifted - means)
        best = max(best, float(acc.max()) / side ** n)
        side *= 2
    return best


def write_field(f: SampledField, path) -> None:
    """Write a field as a 32-byte header plus little-endian complex64 values."""
    g = f.grid
    header = _FIELD_HEADER.pack(FIELD_MAGIC, g.n1, g.n2, g.points_per_axis, g.period)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(f.values, dtype="<c8").tobytes())


def read_field(path) -> SampledField:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _FIELD_HEADER.size:
        raise ValueError(f"{path}: truncated field file")
    magic, n1, n2, N, L = _FIELD_HEADER.unpack_from(raw)
    if magic != FIELD_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    grid = make_grid(int(n1), int(n2), int(N), float(L))
    vals = np.frombuffer(raw, dtype="<c8", offset=_FIELD_HEADER.size)
    if vals.size != grid.size:
        raise ValueError(f"{path}: expected {grid.size} samples, found {vals.size}")
    return SampledField(grid, vals.astype(np.complex128))


def field_to_json(f: SampledField) -> str:
    """JSON form for tiny grids and debugging; lossless float64 round trip."""
    g = f.grid
    flat = f.values.ravel()
    doc = {
        "n1": g.n1,
        "n2": g.n2,
        "points_per_axis": g.points_per_axis,
        "period": g.period,
        "re": flat.real.tolist(),
        "im": flat.imag.tolist(),
    }
    return json.dumps(doc, sort_keys=True)


def field_from_json(text: str) -> SampledField:
    doc = json.loads(text)
    grid = make_grid(doc["n1"], doc["n2"], doc["points_per_axis"], doc["period"])
    vals = np.asarray(doc["re"], dtype=float) + 1j * np.asarray(doc["im"], dtype=float)
    return SampledField(grid, vals)
