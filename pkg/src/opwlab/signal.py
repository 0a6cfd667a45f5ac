"""Uniform-grid signals on the real line.

The Fourier convention throughout is ``F(xi) = int f(x) exp(-2 pi i x xi) dx``.
The discrete transforms below reproduce it exactly at the grid nodes: the
raw FFT is scaled by the sample spacing and phase-corrected for grids whose
origin is not at zero, so that identities such as ``FT(sinc) = box`` hold
without stray constants.

A transform maps a grid with spacing ``dx`` and ``n`` nodes onto the
conjugate grid with spacing ``1 / (n dx)``. Each signal remembers the origin
of the grid it was transformed from (``dual_x0``) so that a round trip lands
back on the original nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GridMismatch, GridTooSmall, InvalidArgument

__all__ = [
    "Grid1D",
    "SampledSignal",
    "Indicator",
    "Sinc",
    "Sinusoid",
    "Gaussian",
    "Table",
    "make_grid",
    "sample",
    "dft",
    "idft",
    "l2_norm",
    "inner",
    "translate",
    "modulate",
    "restrict",
    "tail_energy",
    "interval_energy",
    "choose_B",
    "save_signal",
    "load_signal",
]

# Relative slack used when deciding whether a coordinate sits on a node.
_NODE_TOL = 1e-9


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid ``x_j = x0 + j * dx`` for ``j = 0 .. n-1``."""

    x0: float
    dx: float
    n: int

    def __post_init__(self):
        if not np.isfinite(self.x0):
            raise InvalidArgument("x0 must be finite")
        if not (self.dx > 0 and np.isfinite(self.dx)):
            raise InvalidArgument(f"dx must be positive, got {self.dx}")
        if int(self.n) != self.n or self.n < 2:
            raise InvalidArgument(f"n must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "x0", float(self.x0))
        object.__setattr__(self, "dx", float(self.dx))
        object.__setattr__(self, "n", int(self.n))

    @property
    def nodes(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)

    @property
    def length(self) -> float:
        return self.n * self.dx

    @property
    def x_max(self) -> float:
        return self.x0 + (self.n - 1) * self.dx

    def conjugate(self, origin: float | None = None) -> "Grid1D":
        """Grid of the Fourier variable; centred on zero unless ``origin`` is given."""
        d = 1.0 / (self.n * self.dx)
        if origin is None:
            origin = -(self.n // 2) * d
        return Grid1D(origin, d, self.n)

    def matches(self, other: "Grid1D") -> bool:
        return (
            self.n == other.n
            and abs(self.dx - other.dx) <= _NODE_TOL * self.dx
            and abs(self.x0 - other.x0) <= _NODE_TOL * self.dx
        )

    def index_of(self, x) -> np.ndarray:
        """Integer node indices of ``x``; raises if a point is not on a node.

        Indices may fall outside ``[0, n)``; callers decide how to treat them.
        """
        pos = (np.asarray(x, dtype=float) - self.x0) / self.dx
        idx = np.rint(pos)
        if np.any(np.abs(pos - idx) > 1e-6):
            raise GridMismatch("points do not coincide with grid nodes")
        return idx.astype(np.int64)

    def is_shift_aligned(self, dx: float) -> bool:
        """True when this grid's nodes are integer multiples of ``dx``."""
        if abs(self.dx - dx) > _NODE_TOL * dx:
            return False
        k = self.x0 / dx
        return abs(k - round(k)) <= 1e-6


@dataclass(frozen=True)
class SampledSignal:
    """Complex samples of a function on a :class:`Grid1D`.

    ``dual_x0`` is the origin of the grid this signal was transformed from,
    if any. It only affects where :func:`dft` / :func:`idft` place their output.
    """

    grid: Grid1D
    samples: np.ndarray
    dual_x0: float | None = field(default=None)

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.complex128)
        if arr.ndim != 1 or arr.shape[0] != self.grid.n:
            raise InvalidArgument(
                f"expected {self.grid.n} samples, got shape {arr.shape}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def with_samples(self, values) -> "SampledSignal":
        return SampledSignal(self.grid, values, self.dual_x0)

    def __add__(self, other):
        _check_same_grid(self, other)
        return self.with_samples(self.samples + other.samples)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return self.with_samples(self.samples - other.samples)

    def __mul__(self, other):
        if isinstance(other, SampledSignal):
            _check_same_grid(self, other)
            return self.with_samples(self.samples * other.samples)
        return self.with_samples(self.samples * other)

    __rmul__ = __mul__


# ---------------------------------------------------------------- signal kinds


@dataclass(frozen=True)
class Indicator:
    """Characteristic function of the closed interval ``[-B, B]``."""

    B: float

    def __post_init__(self):
        if not self.B > 0:
            raise InvalidArgument("Indicator needs B > 0")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return (np.abs(x) <= self.B * (1 + 1e-12)).astype(float)


@dataclass(frozen=True)
class Sinc:
    """``sin(2 pi B x) / (pi x)``, whose Fourier transform is the box on ``[-B, B]``."""

    B: float

    def __post_init__(self):
        if not self.B > 0:
            raise InvalidArgument("Sinc needs B > 0")

    def __call__(self, x):
        return 2 * self.B * np.sinc(2 * self.B * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Sinusoid:
    beta: float
    phase: float = 0.0

    def __call__(self, x):
        return np.sin(2 * np.pi * self.beta * np.asarray(x, dtype=float) + self.phase)


@dataclass(frozen=True)
class Gaussian:
    """``exp(-pi (x / width)^2)``; with unit width it is its own transform."""

    width: float = 1.0

    def __post_init__(self):
        if not self.width > 0:
            raise InvalidArgument("Gaussian needs width > 0")

    def __call__(self, x):
        return np.exp(-np.pi * (np.asarray(x, dtype=float) / self.width) ** 2)


@dataclass(frozen=True)
class Table:
    values: tuple

    def __call__(self, x):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != np.shape(x):
            raise InvalidArgument(
                f"table has {vals.size} values but the grid has {np.size(x)} nodes"
            )
        return vals


# ------------------------------------------------------------------ operations


def make_grid(center: float, half_width: float, n: int) -> Grid1D:
    """Grid of ``n`` nodes starting at ``center - half_width`` with spacing ``2 half_width / n``."""
    if not half_width > 0:
        raise InvalidArgument(f"half_width must be positive, got {half_width}")
    if int(n) != n or n < 2:
        raise InvalidArgument(f"n must be an integer >= 2, got {n}")
    return Grid1D(center - half_width, 2.0 * half_width / n, int(n))


def sample(kind, grid: Grid1D) -> SampledSignal:
    return SampledSignal(grid, kind(grid.nodes))


def _fourier(values, x0, dx, xi0, sign, axis=-1):
    """``dx * sum_j v_j exp(sign 2 pi i x_j xi_k)`` on ``xi_k = xi0 + k / (n dx)``.

    Exact (up to FFT rounding) for arbitrary origins ``x0`` and ``xi0``.
    """
    values = np.asarray(values, dtype=np.complex128)
    n = values.shape[axis]
    shape = [1] * values.ndim
    shape[axis] = n
    j = np.arange(n)
    dxi = 1.0 / (n * dx)
    pre = np.exp(sign * 2j * np.pi * np.mod(j * dx * xi0, 1.0)).reshape(shape)
    # mod 1 keeps the phase argument small for wide grids
    post = np.exp(
        sign * 2j * np.pi * np.mod(x0 * xi0 + x0 * dxi * j, 1.0)
    ).reshape(shape)
    if sign < 0:
        core = np.fft.fft(values * pre, axis=axis)
    else:
        core = np.fft.ifft(values * pre, axis=axis) * n
    return dx * post * core


def _transform(f: SampledSignal, sign: int) -> SampledSignal:
    out_grid = f.grid.conjugate(f.dual_x0)
    vals = _fourier(f.samples, f.grid.x0, f.grid.dx, out_grid.x0, sign)
    return SampledSignal(out_grid, vals, dual_x0=f.grid.x0)


def dft(f: SampledSignal) -> SampledSignal:
    """Continuous-convention Fourier transform sampled on the conjugate grid."""
    return _transform(f, -1)


def idft(F: SampledSignal) -> SampledSignal:
    """Inverse of :func:`dft`; returns to the grid recorded in ``F.dual_x0``."""
    return _transform(F, +1)


def _check_same_grid(f, g):
    if not f.grid.matches(g.grid):
        raise GridMismatch(f"grids differ: {f.grid} vs {g.grid}")


def l2_norm(f: SampledSignal) -> float:
    return float(np.sqrt(f.grid.dx * np.sum(np.abs(f.samples) ** 2)))


def inner(f: SampledSignal, g: SampledSignal) -> complex:
    """``int f conj(g) dx`` by the Riemann sum."""
    _check_same_grid(f, g)
    return complex(f.grid.dx * np.vdot(g.samples, f.samples))


def modulate(f: SampledSignal, nu: float) -> SampledSignal:
    """``exp(2 pi i nu x) f(x)``."""
    return f.with_samples(f.samples * np.exp(2j * np.pi * nu * f.x))


def translate(f: SampledSignal, t: float) -> SampledSignal:
    """``f(x - t)``.

    Shifts by whole samples are exact and zero-fill at the edges. Other shifts
    use a Fourier phase ramp, i.e. periodic band-limited interpolation.
    """
    k = t / f.grid.dx
    kr = round(k)
    if abs(k - kr) <= 1e-9 * max(1.0, abs(k)):
        out = np.zeros(f.grid.n, dtype=np.complex128)
        if kr >= 0:
            if kr < f.grid.n:
                out[kr:] = f.samples[: f.grid.n - kr]
        elif -kr < f.grid.n:
            out[:kr] = f.samples[-kr:]
        return f.with_samples(out)
    F = dft(f)
    F = F.with_samples(F.samples * np.exp(-2j * np.pi * F.x * t))
    return f.with_samples(idft(F).samples)


def _inside(x, B):
    return np.abs(x) <= B + _NODE_TOL * max(1.0, B)


def restrict(f: SampledSignal, B: float) -> SampledSignal:
    """Zero ``f`` outside the closed interval ``[-B, B]``."""
    return f.with_samples(np.where(_inside(f.x, B), f.samples, 0))


def tail_energy(y: SampledSignal, B: float) -> float:
    """Energy of ``y`` on nodes with ``|x| > B``."""
    if not B > 0:
        raise InvalidArgument("B must be positive")
    out = ~_inside(y.x, B)
    return float(y.grid.dx * np.sum(np.abs(y.samples[out]) ** 2))


def interval_energy(y: SampledSignal, B: float) -> float:
    """Energy of ``y`` on nodes with ``|x| <= B``."""
    return float(y.grid.dx * np.sum(np.abs(y.samples[_inside(y.x, B)]) ** 2))


def choose_B(y: SampledSignal, budget: float) -> float:
    """Smallest node magnitude ``B > 0`` with ``tail_energy(y, B) < budget``.

    Raises :class:`GridTooSmall` when the answer is the outermost node while
    ``y`` is still non-zero there, since the grid then cuts off part of ``y``.
    """
    if not budget > 0:
        raise InvalidArgument("budget must be positive")
    e = y.grid.dx * np.abs(y.samples) ** 2
    if not e.sum() > 0:
        raise InvalidArgument("choose_B needs a non-zero signal")
    a = np.abs(y.x)
    cand, inv = np.unique(np.round(a / y.grid.dx, 6), return_inverse=True)
    per = np.bincount(inv, weights=e, minlength=cand.size)
    # tail(cand[i]) = energy strictly outside cand[i], accumulated from the edge inward
    tails = np.concatenate([np.cumsum(per[::-1])[::-1][1:], [0.0]])
    ok = np.nonzero((tails < budget) & (cand > 0))[0]
    i = int(ok[0])
    if i == cand.size - 1:
        edge = np.abs(y.samples[[0, -1]]).max()
        if edge > 1e-12 * np.abs(y.samples).max():
            raise GridTooSmall(
                "tail budget unattainable: the signal is non-zero at the grid edge"
            )
    return float(cand[i] * y.grid.dx)


# --------------------------------------------------------------------------- io


def save_signal(path, f: SampledSignal, centers: bool = False) -> None:
    """Write the columnar text format: a grid header, then ``re im`` per line."""
    lines = [f"# x0={f.grid.x0!r} dx={f.grid.dx!r} n={f.grid.n}"]
    if f.dual_x0 is not None:
        lines.append(f"# dual_x0={f.dual_x0!r}")
    if centers:
        lines.append("# centers")
    lines.extend(f"{v.real:.17g} {v.imag:.17g}" for v in f.samples)
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_header(line: str) -> dict:
    fields = {}
    for tok in line.lstrip("#").split():
        if "=" in tok:
            k, v = tok.split("=", 1)
            fields[k] = v
    return fields


def load_signal(path) -> SampledSignal:
    head = {}
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            head.update(_parse_header(line))
            continue
        re_, im_ = line.split()
        rows.append(complex(float(re_), float(im_)))
    try:
        grid = Grid1D(float(head["x0"]), float(head["dx"]), int(head["n"]))
    except KeyError as exc:
        raise InvalidArgument(f"{path}: missing header field {exc}") from None
    dual = float(head["dual_x0"]) if "dual_x0" in head else None
    return SampledSignal(grid, np.array(rows), dual)
