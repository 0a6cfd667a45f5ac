"""Band-limited approximation of arbitrary targets on a finite interval.

A target ``y`` is approximated on ``[-B, B]`` by ``m = sum_k c_k b_k`` where the
``b_k`` are translates of a sinc of bandwidth ``alpha`` placed on the Nyquist
lattice ``k / (2 alpha)``. When the target oscillates faster than ``alpha``,
the fit is superoscillatory: the coefficients, and ``m`` outside the
interval, become very large. The Tikhonov weight ``lam`` trades the residual
on the interval against that energy.

The sinc translates are realised as periodic sincs on the grid, i.e. their
discrete spectra are exactly the weighted band ``|s| <= alpha`` on the
conjugate grid (trapezoid weights at the band edge). This makes ``m``
exactly band-limited on the discrete grid, not just approximately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidArgument, NumericalFailure, UndefinedRatio
from .signal import (
    Grid1D,
    SampledSignal,
    dft,
    idft,
    interval_energy,
    l2_norm,
    tail_energy,
)
from .signal import _check_same_grid, _inside

__all__ = [
    "SynthesisConfig",
    "SincBasis",
    "SynthesisResult",
    "collocation",
    "solve_tikhonov",
    "solve_normal_equations",
    "synthesize",
    "residual_on_interval",
    "bandlimit_leakage",
    "coefficient_signal",
    "energy_report",
]


@dataclass(frozen=True)
class SynthesisConfig:
    alpha: float
    B: float
    extent_factor: float = 3.0
    lam: float = 1e-8
    collocation_oversample: int = 8

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidArgument("alpha must be positive")
        if not self.B > 0:
            raise InvalidArgument("B must be positive")
        if not self.extent_factor >= 1:
            raise InvalidArgument("extent_factor must be >= 1")
        if not self.lam >= 0:
            raise InvalidArgument("lam must be non-negative")
        if int(self.collocation_oversample) != self.collocation_oversample or (
            self.collocation_oversample < 2
        ):
            raise InvalidArgument("collocation_oversample must be an integer >= 2")

    def replace(self, **changes) -> "SynthesisConfig":
        params = dict(
            alpha=self.alpha,
            B=self.B,
            extent_factor=self.extent_factor,
            lam=self.lam,
            collocation_oversample=self.collocation_oversample,
        )
        params.update(changes)
        return SynthesisConfig(**params)


class SincBasis:
    """Nyquist-spaced periodic sinc translates of bandwidth ``alpha``.

    Parameters
    ----------
    alpha : float
        Bandwidth; every element has spectrum supported in ``[-alpha, alpha]``.
    half_extent : float
        Centres ``k / (2 alpha)`` are kept for ``|k / (2 alpha)| <= half_extent``.
    conj : Grid1D
        Grid of the Fourier variable on which the band is laid out.
    """

    def __init__(self, alpha, half_extent, conj):
        self.alpha = float(alpha)
        self.conj = conj
        step = 1.0 / (2 * alpha)
        kmax = int(np.floor(half_extent / step + 1e-9))
        self.centers = step * np.arange(-kmax, kmax + 1)
        s = conj.nodes
        tol = 1e-9 * conj.dx
        inband = np.abs(s) <= alpha + tol
        self.band_index = np.nonzero(inband)[0]
        self.band = s[inband]
        w = np.ones(self.band.size)
        w[np.abs(np.abs(self.band) - alpha) <= tol] = 0.5
        self.band_weights = w
        if self.band.size < 2:
            raise InvalidArgument(
                f"bandwidth {alpha} is below the conjugate grid spacing {conj.dx}"
            )

    def __len__(self):
        return self.centers.size

    def _coeff_to_band(self):
        # (n_band, n_centers): w_l exp(-2 pi i s_l c_k)
        ph = np.exp(-2j * np.pi * np.mod(np.outer(self.band, self.centers), 1.0))
        return self.band_weights[:, None] * ph

    def matrix(self, x) -> np.ndarray:
        """``G[j, k] = b_k(x_j)``."""
        ex = np.exp(2j * np.pi * np.mod(np.outer(np.asarray(x), self.band), 1.0))
        return (ex * self.conj.dx) @ self._coeff_to_band()

    def spectrum(self, coefficients, dual_x0) -> SampledSignal:
        """Exact discrete spectrum of the expansion, zero off the band."""
        vals = np.zeros(self.conj.n, dtype=np.complex128)
        vals[self.band_index] = self._coeff_to_band() @ np.asarray(coefficients)
        return SampledSignal(self.conj, vals, dual_x0=dual_x0)

    def expand(self, coefficients, grid, dual_x0=None) -> SampledSignal:
        """Evaluate ``sum_k c_k b_k`` on every node of ``grid``."""
        m = idft(self.spectrum(coefficients, grid.x0))
        return SampledSignal(grid, m.samples, dual_x0=self.conj.x0)


@dataclass(frozen=True)
class SynthesisResult:
    m: SampledSignal
    coefficients: np.ndarray
    residual: float
    total_energy: float
    interval_energy: float
    energy_ratio: float
    leakage: float
    spectrum: SampledSignal
    basis: SincBasis
    config: SynthesisConfig


def collocation(grid, B, alpha, oversample):
    """Node indices and trapezoid weights for the interval functional on ``[-B, B]``.

    Points are grid nodes spaced about ``1 / (2 alpha oversample)`` apart and
    always include the two outermost nodes inside the interval.
    """
    idx = np.nonzero(_inside(grid.nodes, B))[0]
    if idx.size < 2:
        raise InvalidArgument(f"fewer than two grid nodes inside [-{B}, {B}]")
    stride = max(1, int(np.floor(1.0 / (2 * alpha * oversample * grid.dx) + 1e-9)))
    lo, hi = idx[0], idx[-1]
    count = int(np.ceil((hi - lo) / stride)) + 1
    pts = np.unique(np.rint(np.linspace(lo, hi, count)).astype(np.int64))
    xc = grid.nodes[pts]
    d = np.diff(xc)
    w = np.zeros(xc.size)
    w[:-1] += d / 2
    w[1:] += d / 2
    return pts, w


def solve_tikhonov(G, y, w, lam):
    """Minimise ``sum_j w_j |(G c - y)_j|^2 + lam |c|^2`` via the SVD of ``sqrt(w) G``.

    Working on the weighted design matrix instead of the normal equations
    keeps the usable range of ``lam`` down to roughly ``(eps * s_max)^2``.
    """
    sw = np.sqrt(w)
    try:
        U, S, Vh = np.linalg.svd(sw[:, None] * G, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD failed: {exc}") from exc
    b = U.conj().T @ (sw * y)
    if lam > 0:
        filt = S / (S**2 + lam)
    else:
        cut = S[0] * max(G.shape) * np.finfo(float).eps
        filt = np.where(S > cut, 1.0 / np.where(S > cut, S, 1.0), 0.0)
    c = Vh.conj().T @ (filt * b)
    if not np.all(np.isfinite(c)):
        raise NumericalFailure("non-finite coefficients")
    return c


def solve_normal_equations(G, y, w, lam):
    """Same objective through ``(G^H W G + lam I) c = G^H W y``.

    Cholesky first; an eigenvalue-thresholded pseudo-inverse if the matrix is
    not numerically positive definite.
    """
    GW = G.conj().T * w
    A = GW @ G + lam * np.eye(G.shape[1])
    rhs = GW @ y
    try:
        c = scipy.linalg.cho_solve(scipy.linalg.cho_factor(A), rhs)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        vals, vecs = np.linalg.eigh(A)
        keep = vals > vals.max() * A.shape[0] * np.finfo(float).eps
        c = vecs[:, keep] @ ((vecs[:, keep].conj().T @ rhs) / vals[keep])
    if not np.all(np.isfinite(c)):
        raise NumericalFailure("non-finite coefficients")
    return c


_SOLVERS = {"svd": solve_tikhonov, "normal": solve_normal_equations}


def synthesize(target: SampledSignal, cfg: SynthesisConfig, method="svd") -> SynthesisResult:
    """Fit a band-limited ``m`` to ``target`` on ``[-cfg.B, cfg.B]``.

    The basis is laid out on the conjugate grid of ``target`` (honouring its
    ``dual_x0``), so the same routine fits in the time or frequency domain.
    """
    grid = target.grid
    nyq = 1.0 / (2 * cfg.alpha)
    reach = cfg.extent_factor * cfg.B + 2 * nyq
    if grid.x0 > -reach or grid.x_max < reach:
        raise InvalidArgument(
            f"grid [{grid.x0}, {grid.x_max}] too narrow for basis reach {reach}"
        )
    basis = SincBasis(cfg.alpha, cfg.extent_factor * cfg.B, grid.conjugate(target.dual_x0))
    pts, w = collocation(grid, cfg.B, cfg.alpha, cfg.collocation_oversample)
    yc = target.samples[pts]

    if not np.any(yc):
        coef = np.zeros(len(basis), dtype=np.complex128)
    else:
        G = basis.matrix(grid.nodes[pts])
        coef = _SOLVERS[method](G, yc, w, cfg.lam)

    spectrum = basis.spectrum(coef, grid.x0)
    m = SampledSignal(grid, idft(spectrum).samples, dual_x0=spectrum.grid.x0)
    total = l2_norm(m) ** 2
    inside = interval_energy(m, cfg.B)
    if total == 0:
        ratio, leak = 1.0, 0.0
    else:
        ratio = total / inside if inside > 0 else np.inf
        leak = bandlimit_leakage(m, cfg.alpha)
    return SynthesisResult(
        m=m,
        coefficients=coef,
        residual=residual_on_interval(m, target, cfg.B),
        total_energy=total,
        interval_energy=inside,
        energy_ratio=float(max(ratio, 1.0)),
        leakage=leak,
        spectrum=spectrum,
        basis=basis,
        config=cfg,
    )


def residual_on_interval(m: SampledSignal, y: SampledSignal, B: float) -> float:
    """L2 norm of ``m - y`` over ``[-B, B]``."""
    _check_same_grid(m, y)
    return float(np.sqrt(interval_energy(m - y, B)))


def bandlimit_leakage(m: SampledSignal, alpha: float) -> float:
    """Fraction of spectral energy of ``m`` outside ``[-alpha, alpha]``."""
    if not alpha > 0:
        raise InvalidArgument("alpha must be positive")
    M = dft(m)
    total = l2_norm(M) ** 2
    if total == 0:
        raise UndefinedRatio("leakage of the zero signal is undefined")
    return float(min(1.0, tail_energy(M, alpha) / total))


def coefficient_signal(result: SynthesisResult) -> SampledSignal:
    """Coefficients laid out on the grid of basis centres, for :func:`save_signal` with ``centers=True``."""
    c = result.basis.centers
    step = 1.0 / (2 * result.basis.alpha)
    return SampledSignal(Grid1D(float(c[0]), step, c.size), np.asarray(result.coefficients))


def energy_report(result: SynthesisResult):
    """``(total_energy, interval_energy, energy_ratio, sup_norm)``."""
    return (
        result.total_energy,
        result.interval_energy,
        result.energy_ratio,
        float(np.abs(result.m.samples).max()),
    )
