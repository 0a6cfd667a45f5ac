"""Operators given by a spreading function or a Kohn-Nirenberg symbol.

An operator acts as

    H f(x) = iint eta(t, nu) exp(2 pi i x nu) f(x - t) dt dnu
           = int sigma(x, xi) F(xi) exp(2 pi i x xi) dxi,

and ``sigma`` and ``eta`` are exchanged by the symplectic Fourier transform,
which is its own inverse.

Structured representations have fast application paths. ``Dense`` holds a
sampled spreading function and is applied by brute-force quadrature; it is
the reference the structured paths are checked against.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from . import kernels
from .errors import (
    GridMismatch,
    InvalidArgument,
    NotHilbertSchmidt,
    ResolutionError,
    SizeCapExceeded,
)
from .signal import (
    Grid1D,
    SampledSignal,
    _fourier,
    dft,
    idft,
    l2_norm,
    load_signal,
    save_signal,
)

DEFAULT_DENSE_CAP = 256
DEFAULT_THRESHOLD = 1e-10


@dataclass(frozen=True)
class Grid2D:
    tgrid: Grid1D
    vgrid: Grid1D

    @property
    def shape(self):
        return (self.tgrid.n, self.vgrid.n)


@dataclass(frozen=True)
class SpreadingGrid:
    """Samples on a :class:`Grid2D`; holds either a spreading function or a symbol.

    ``dual`` records the origins of the axes this array was transformed from,
    in output order, so the symplectic transform can return to them exactly.
    """

    grid: Grid2D
    values: np.ndarray
    dual: tuple | None = None

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.complex128)
        if arr.shape != self.grid.shape:
            raise InvalidArgument(f"values shape {arr.shape} != grid {self.grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgument("spreading values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def norm(self) -> float:
        d = self.grid.tgrid.dx * self.grid.vgrid.dx
        return float(np.sqrt(d * np.sum(np.abs(self.values) ** 2)))


# ------------------------------------------------------------ representations


@dataclass(frozen=True)
class Multiplication:
    m: SampledSignal


@dataclass(frozen=True)
class Convolution:
    h: SampledSignal


@dataclass(frozen=True)
class Separable:
    """``eta(t, nu) = u(t) * FT[m](nu)``, i.e. ``H f = m * (u conv f)``."""

    u: SampledSignal
    m: SampledSignal


@dataclass(frozen=True)
class SeparableFreq:
    """``eta(t, nu) = h(t) * w(nu)``, i.e. ``H f = W * (h conv f)`` with ``W`` the inverse FT of ``w``."""

    h: SampledSignal
    w: SampledSignal


@dataclass(frozen=True)
class Dense:
    eta: SpreadingGrid


@dataclass(frozen=True)
class SupportBox:
    t_min: float
    t_max: float
    v_min: float
    v_max: float
    empty: bool = False

    def __post_init__(self):
        if not self.empty and (self.t_min > self.t_max or self.v_min > self.v_max):
            raise InvalidArgument("support box bounds are inverted")

    @classmethod
    def make_empty(cls):
        return cls(0.0, 0.0, 0.0, 0.0, empty=True)

    def within(self, t_lo, t_hi, v_lo, v_hi, tol=1e-9) -> bool:
        if self.empty:
            return True
        return (
            self.t_min >= t_lo - tol
            and self.t_max <= t_hi + tol
            and self.v_min >= v_lo - tol
            and self.v_max <= v_hi + tol
        )

    def as_dict(self):
        return {
            "t_min": self.t_min,
            "t_max": self.t_max,
            "v_min": self.v_min,
            "v_max": self.v_max,
            "empty": self.empty,
        }


# ------------------------------------------------------------------- helpers


def kernel_grid(dx: float, half_width: float) -> Grid1D:
    """Odd-length grid of spacing ``dx`` centred on 0 covering ``[-half_width, half_width]``."""
    k = max(1, int(np.floor(half_width / dx + 1e-9)))
    return Grid1D(-k * dx, dx, 2 * k + 1)


def mollifier(delta: float, grid: Grid1D) -> SampledSignal:
    """Normalised boxcar ``(1 / 2 delta) chi_[-delta, delta]``.

    Nodes exactly at ``+-delta`` carry half weight, so the Riemann sum of the
    samples is exactly 1 when ``delta`` is a whole number of samples.
    """
    if not delta > 0 or delta < 2 * grid.dx * (1 - 1e-9):
        raise ResolutionError(f"delta={delta} needs at least 2 samples (dx={grid.dx})")
    x = np.abs(grid.nodes)
    tol = 1e-9 * grid.dx
    vals = np.where(x <= delta + tol, 1.0, 0.0)
    vals[np.abs(x - delta) <= tol] = 0.5
    return SampledSignal(grid, vals / (2 * delta))


def boxcar_smoothed_indicator(B: float, delta: float, grid: Grid1D) -> SampledSignal:
    """Closed form of ``mollifier(delta) * chi_[-B, B]``: a trapezoid with ramps of width ``2 delta``."""
    if not 0 < delta < B:
        raise InvalidArgument("need 0 < delta < B")
    x = grid.nodes
    vals = np.zeros_like(x)
    up = (x >= -B - delta) & (x <= -B + delta)
    flat = (x > -B + delta) & (x < B - delta)
    down = (x >= B - delta) & (x <= B + delta)
    vals[up] = (x[up] + B + delta) / (2 * delta)
    vals[flat] = 1.0
    vals[down] = -(x[down] - B - delta) / (2 * delta)
    return SampledSignal(grid, vals)


def discrete_delta(grid: Grid2D, t0: float = 0.0, nu0: float = 0.0) -> SpreadingGrid:
    """Mass ``1 / (dt dnu)`` at node ``(t0, nu0)``, so its quadrature integral is 1."""
    i = int(grid.tgrid.index_of(t0))
    j = int(grid.vgrid.index_of(nu0))
    if not (0 <= i < grid.tgrid.n and 0 <= j < grid.vgrid.n):
        raise InvalidArgument("delta location outside the grid")
    vals = np.zeros(grid.shape, dtype=np.complex128)
    vals[i, j] = 1.0 / (grid.tgrid.dx * grid.vgrid.dx)
    return SpreadingGrid(grid, vals)


def convolve(f: SampledSignal, k: SampledSignal) -> SampledSignal:
    """``int k(t) f(x - t) dt`` on the nodes of ``f``, zero-filled outside its grid.

    ``k`` must share the spacing of ``f`` and sit on integer multiples of it.
    """
    if not k.grid.is_shift_aligned(f.grid.dx):
        raise GridMismatch("kernel nodes must be integer multiples of the signal spacing")
    nz = np.nonzero(k.samples)[0]
    if nz.size == 0:
        return f.with_samples(np.zeros(f.grid.n))
    a, b = nz[0], nz[-1]
    shift = int(round(k.grid.x0 / f.grid.dx)) + a
    full = fftconvolve(f.samples, k.samples[a : b + 1])
    n = f.grid.n
    out = np.zeros(n, dtype=np.complex128)
    # out[j] = full[j - shift]
    lo, hi = max(0, shift), min(n, shift + full.size)
    if lo < hi:
        out[lo:hi] = full[lo - shift : hi - shift]
    return f.with_samples(out * f.grid.dx)


def _reflect_conj(k: SampledSignal) -> SampledSignal:
    """``conj(k(-t))``, the kernel of the adjoint convolution."""
    g = Grid1D(-k.grid.x_max, k.grid.dx, k.grid.n)
    return SampledSignal(g, np.conj(k.samples[::-1]))


def freq_window(w: SampledSignal, x) -> np.ndarray:
    """``W(x) = int w(nu) exp(2 pi i x nu) dnu`` by direct summation over non-zero samples."""
    nz = np.nonzero(w.samples)[0]
    nu = w.grid.nodes[nz]
    ph = np.exp(2j * np.pi * np.mod(np.outer(np.asarray(x), nu), 1.0))
    return (ph @ w.samples[nz]) * w.grid.dx


def dense_cap() -> int:
    """Per-axis size limit for dense spreading grids; ``OPWLAB_DENSE_CAP`` overrides it."""
    raw = os.environ.get("OPWLAB_DENSE_CAP")
    if raw is None:
        return DEFAULT_DENSE_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise InvalidArgument(f"OPWLAB_DENSE_CAP must be an integer, got {raw!r}") from None
    if cap < 1:
        raise InvalidArgument("OPWLAB_DENSE_CAP must be positive")
    return cap


def _require_same(a: SampledSignal, f: SampledSignal, what: str):
    if not a.grid.matches(f.grid):
        raise GridMismatch(f"{what} must live on the input grid")


def _dense_args(eta: SpreadingGrid, f: SampledSignal, cap):
    tg, vg = eta.grid.tgrid, eta.grid.vgrid
    cap = dense_cap() if cap is None else cap
    if tg.n > cap or vg.n > cap:
        raise SizeCapExceeded(f"dense grid {eta.grid.shape} exceeds cap {cap} per axis")
    if not tg.is_shift_aligned(f.grid.dx):
        raise GridMismatch("t-axis must have the input spacing and node-aligned origin")
    shift0 = int(round(tg.x0 / tg.dx))
    return (
        np.ascontiguousarray(eta.values),
        np.ascontiguousarray(vg.nodes),
        np.ascontiguousarray(f.x),
        shift0,
        tg.dx,
        vg.dx,
    )


# --------------------------------------------------------------- application


def apply(op, f: SampledSignal, cap: int | None = None) -> SampledSignal:
    """Apply ``op`` to ``f``; the output lives on the grid of ``f``."""
    if isinstance(op, Multiplication):
        _require_same(op.m, f, "multiplier")
        return f.with_samples(op.m.samples * f.samples)
    if isinstance(op, Convolution):
        return convolve(f, op.h)
    if isinstance(op, Separable):
        _require_same(op.m, f, "multiplier")
        return f.with_samples(op.m.samples * convolve(f, op.u).samples)
    if isinstance(op, SeparableFreq):
        g = convolve(f, op.h)
        return f.with_samples(freq_window(op.w, f.x) * g.samples)
    if isinstance(op, Dense):
        eta, nu, x, shift0, dt, dv = _dense_args(op.eta, f, cap)
        fs = np.ascontiguousarray(f.samples)
        return f.with_samples(kernels.dense_apply(eta, nu, x, fs, shift0, dt, dv))
    raise TypeError(f"unknown operator representation {type(op).__name__}")


def apply_adjoint(op, g: SampledSignal, cap: int | None = None) -> SampledSignal:
    """Apply the L2 adjoint of ``op`` (same discretisation as :func:`apply`)."""
    if isinstance(op, Multiplication):
        _require_same(op.m, g, "multiplier")
        return g.with_samples(np.conj(op.m.samples) * g.samples)
    if isinstance(op, Convolution):
        return convolve(g, _reflect_conj(op.h))
    if isinstance(op, Separable):
        _require_same(op.m, g, "multiplier")
        return convolve(g.with_samples(np.conj(op.m.samples) * g.samples), _reflect_conj(op.u))
    if isinstance(op, SeparableFreq):
        Wc = np.conj(freq_window(op.w, g.x))
        return convolve(g.with_samples(Wc * g.samples), _reflect_conj(op.h))
    if isinstance(op, Dense):
        eta, nu, x, shift0, dt, dv = _dense_args(op.eta, g, cap)
        gs = np.ascontiguousarray(g.samples)
        return g.with_samples(kernels.dense_apply_adjoint(eta, nu, x, gs, shift0, dt, dv))
    raise TypeError(f"unknown operator representation {type(op).__name__}")


def operator_norm_estimate(op, grid: Grid1D, iters: int = 60, seed: int = 0) -> float:
    """Power iteration on ``H^* H`` over signals on ``grid``."""
    rng = np.random.default_rng(seed)
    v = SampledSignal(grid, rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n))
    v = v * (1.0 / l2_norm(v))
    est = 0.0
    for _ in range(iters):
        w = apply_adjoint(op, apply(op, v))
        nw = l2_norm(w)
        if nw == 0:
            return 0.0
        v = w * (1.0 / nw)
        est = nw
    return float(np.sqrt(est))


# ------------------------------------------------------- symbol and spreading


def _symplectic(g: SpreadingGrid) -> SpreadingGrid:
    """``G(p, q) = iint g(a, b) exp(-2 pi i (a q - b p)) da db`` on conjugate grids."""
    ag, bg = g.grid.tgrid, g.grid.vgrid
    p0, q0 = g.dual if g.dual is not None else (None, None)
    pg = bg.conjugate(p0)
    qg = ag.conjugate(q0)
    tmp = _fourier(g.values, ag.x0, ag.dx, qg.x0, -1, axis=0)
    out = _fourier(tmp, bg.x0, bg.dx, pg.x0, +1, axis=1)
    return SpreadingGrid(Grid2D(pg, qg), out.T, dual=(ag.x0, bg.x0))


def spreading_to_symbol(eta: SpreadingGrid) -> SpreadingGrid:
    """Kohn-Nirenberg symbol on the ``(x, xi)`` grid conjugate to ``(nu, t)``."""
    return _symplectic(eta)


def symbol_to_spreading(sigma: SpreadingGrid) -> SpreadingGrid:
    """Inverse of :func:`spreading_to_symbol`; the same transform."""
    return _symplectic(sigma)


# ----------------------------------------------------------------- densify


def _trim(sig: SampledSignal, threshold: float) -> SampledSignal:
    """Sub-grid covering the samples above ``threshold * max``; at least two nodes."""
    a = np.abs(sig.samples)
    peak = a.max()
    if peak == 0:
        return sig
    nz = np.nonzero(a > threshold * peak)[0]
    lo, hi = int(nz[0]), int(nz[-1])
    if hi == lo:
        if hi + 1 < sig.grid.n:
            hi += 1
        else:
            lo -= 1
    g = Grid1D(sig.grid.x0 + lo * sig.grid.dx, sig.grid.dx, hi - lo + 1)
    return SampledSignal(g, sig.samples[lo : hi + 1], sig.dual_x0)


def _values_at(sig: SampledSignal, pts) -> np.ndarray:
    idx = sig.grid.index_of(pts)
    ok = (idx >= 0) & (idx < sig.grid.n)
    out = np.zeros(len(idx), dtype=np.complex128)
    out[ok] = sig.samples[idx[ok]]
    return out


def _delta_line(grid: Grid1D) -> np.ndarray:
    i = int(grid.index_of(0.0))
    if not 0 <= i < grid.n:
        raise InvalidArgument("grid must contain the origin for a delta factor")
    v = np.zeros(grid.n, dtype=np.complex128)
    v[i] = 1.0 / grid.dx
    return v


def _tiny_axis(d: float) -> Grid1D:
    return Grid1D(-d, d, 3)


def _factors(op, threshold=DEFAULT_THRESHOLD):
    """Default 1-D factor signals (or ``None`` for a delta) spanning the support."""
    if isinstance(op, Separable):
        return _trim(op.u, threshold), _trim(dft(op.m), threshold)
    if isinstance(op, SeparableFreq):
        return _trim(op.h, threshold), _trim(op.w, threshold)
    if isinstance(op, Multiplication):
        return None, _trim(dft(op.m), threshold)
    if isinstance(op, Convolution):
        return _trim(op.h, threshold), None
    raise TypeError(f"cannot densify {type(op).__name__}")


def densify(op, grid: Grid2D | None = None, threshold=DEFAULT_THRESHOLD, cap=None) -> SpreadingGrid:
    """Sample the spreading function of a structured operator on ``grid``.

    Without a grid, the factors' own nodes trimmed to their support are used.
    Raises :class:`SizeCapExceeded` if either axis exceeds ``cap``.
    """
    if isinstance(op, Dense):
        if grid is None or (
            grid.tgrid.matches(op.eta.grid.tgrid) and grid.vgrid.matches(op.eta.grid.vgrid)
        ):
            return op.eta
        raise InvalidArgument("resampling a dense spreading grid is not supported")
    ft, fv = _factors(op, threshold)
    if grid is None:
        tg = ft.grid if ft is not None else _tiny_axis(op.m.grid.dx)
        vg = fv.grid if fv is not None else _tiny_axis(op.h.grid.conjugate().dx)
        grid = Grid2D(tg, vg)
    else:
        box = support_box(op, threshold)
        tg, vg = grid.tgrid, grid.vgrid
        if not box.within(tg.x0, tg.x_max, vg.x0, vg.x_max, tol=1e-9 * max(tg.dx, vg.dx)):
            raise InvalidArgument(f"grid does not cover the support {box}")
    cap = dense_cap() if cap is None else cap
    if grid.tgrid.n > cap or grid.vgrid.n > cap:
        raise SizeCapExceeded(f"dense grid {grid.shape} exceeds cap {cap} per axis")
    tvals = _delta_line(grid.tgrid) if ft is None else _values_at(ft, grid.tgrid.nodes)
    vvals = _delta_line(grid.vgrid) if fv is None else _values_at(fv, grid.vgrid.nodes)
    return SpreadingGrid(grid, np.outer(tvals, vvals))


# ------------------------------------------------------------------- norms


def hs_norm(op) -> float:
    """Hilbert-Schmidt norm, i.e. the L2 norm of the spreading function."""
    if isinstance(op, Dense):
        return op.eta.norm()
    if isinstance(op, Separable):
        return l2_norm(op.u) * l2_norm(op.m)
    if isinstance(op, SeparableFreq):
        return l2_norm(op.h) * l2_norm(op.w)
    if isinstance(op, (Multiplication, Convolution)):
        raise NotHilbertSchmidt(
            f"{type(op).__name__} has a spreading function concentrated on a line"
        )
    raise TypeError(f"unknown operator representation {type(op).__name__}")


def symbol_sup_norm(op) -> float:
    """``max |sigma|`` over the discrete symbol.

    Separable forms factor: ``sigma(x, xi) = m(x) * FT[u](xi)`` and
    ``sigma(x, xi) = FT[h](xi) * W(x)``. For a mollifier ``u`` the second
    factor peaks at ``FT[u](0) = 1``.
    """
    if isinstance(op, Multiplication):
        return float(np.abs(op.m.samples).max())
    if isinstance(op, Convolution):
        return float(np.abs(dft(op.h).samples).max())
    if isinstance(op, Separable):
        return float(np.abs(op.m.samples).max() * np.abs(dft(op.u).samples).max())
    if isinstance(op, SeparableFreq):
        wmax = max(abs(freq_window(op.w, [0.0])[0]), np.abs(idft(op.w).samples).max())
        return float(np.abs(dft(op.h).samples).max() * wmax)
    if isinstance(op, Dense):
        return float(np.abs(spreading_to_symbol(op.eta).values).max())
    raise TypeError(f"unknown operator representation {type(op).__name__}")


def _support(sig: SampledSignal, threshold):
    a = np.abs(sig.samples)
    peak = a.max()
    if peak == 0:
        return None
    x = sig.grid.nodes[a > threshold * peak]
    return float(x.min()), float(x.max())


def support_box(op, threshold: float = DEFAULT_THRESHOLD) -> SupportBox:
    """Smallest box holding every spreading sample above ``threshold * max |eta|``."""
    if threshold < 0:
        raise InvalidArgument("threshold must be non-negative")
    if isinstance(op, Dense):
        a = np.abs(op.eta.values)
        peak = a.max()
        if peak == 0:
            return SupportBox.make_empty()
        ii, jj = np.nonzero(a > threshold * peak)
        t = op.eta.grid.tgrid.nodes[ii]
        v = op.eta.grid.vgrid.nodes[jj]
        return SupportBox(t.min(), t.max(), v.min(), v.max())
    if isinstance(op, Separable):
        ts, vs = _support(op.u, threshold), _support(dft(op.m), threshold)
    elif isinstance(op, SeparableFreq):
        ts, vs = _support(op.h, threshold), _support(op.w, threshold)
    elif isinstance(op, Multiplication):
        ts, vs = (0.0, 0.0), _support(dft(op.m), threshold)
    elif isinstance(op, Convolution):
        ts, vs = _support(op.h, threshold), (0.0, 0.0)
    else:
        raise TypeError(f"unknown operator representation {type(op).__name__}")
    if ts is None or vs is None:
        return SupportBox.make_empty()
    return SupportBox(ts[0], ts[1], vs[0], vs[1])


# ---------------------------------------------------------------------- io


def save_spreading(path, eta: SpreadingGrid) -> None:
    tg, vg = eta.grid.tgrid, eta.grid.vgrid
    lines = [
        f"# t0={tg.x0!r} dt={tg.dx!r} nt={tg.n} v0={vg.x0!r} dv={vg.dx!r} nv={vg.n}"
    ]
    if eta.dual is not None:
        lines.append(f"# dual_p0={eta.dual[0]!r} dual_q0={eta.dual[1]!r}")
    lines.extend(f"{v.real:.17g} {v.imag:.17g}" for v in eta.values.ravel())
    Path(path).write_text("\n".join(lines) + "\n")


def load_spreading(path) -> SpreadingGrid:
    head = {}
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    head[k] = v
            continue
        re_, im_ = line.split()
        rows.append(complex(float(re_), float(im_)))
    try:
        tg = Grid1D(float(head["t0"]), float(head["dt"]), int(head["nt"]))
        vg = Grid1D(float(head["v0"]), float(head["dv"]), int(head["nv"]))
    except KeyError as exc:
        raise InvalidArgument(f"{path}: missing header field {exc}") from None
    dual = None
    if "dual_p0" in head:
        dual = (float(head["dual_p0"]), float(head["dual_q0"]))
    vals = np.array(rows, dtype=np.complex128).reshape(tg.n, vg.n)
    return SpreadingGrid(Grid2D(tg, vg), vals, dual)


_KINDS = {
    Multiplication: ("multiplication", ("m",)),
    Convolution: ("convolution", ("h",)),
    Separable: ("separable", ("u", "m")),
    SeparableFreq: ("separable_freq", ("h", "w")),
}


def save_operator(path, op) -> None:
    """Write a JSON record; factor signals go to sibling files it references."""
    path = Path(path)
    stem = path.name[: -len(path.suffix)] if path.suffix else path.name
    if isinstance(op, Dense):
        fname = f"{stem}.eta.txt"
        save_spreading(path.parent / fname, op.eta)
        record = {"kind": "dense", "eta": fname}
    else:
        kind, names = _KINDS[type(op)]
        record = {"kind": kind}
        for name in names:
            fname = f"{stem}.{name}.txt"
            save_signal(path.parent / fname, getattr(op, name))
            record[name] = fname
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def load_operator(path):
    path = Path(path)
    record = json.loads(path.read_text())
    kind = record.get("kind")
    if kind == "dense":
        return Dense(load_spreading(path.parent / record["eta"]))
    for cls, (name, fields) in _KINDS.items():
        if name == kind:
            return cls(*(load_signal(path.parent / record[f]) for f in fields))
    raise InvalidArgument(f"{path}: unknown operator kind {kind!r}")
