"""Brute-force reference computations on periodic grids (d <= 3).

Nothing here uses the closed forms of :mod:`collapsing.gaussian`; the free flow
is applied as an FFT multiplier and integrals are grid sums, so agreement with
the closed forms is a genuine cross-check.
"""

from dataclasses import dataclass
import math

import numpy as np

from .exceptions import ConfigurationError, ContractError

BOUNDARY_TOL = 1e-12
DRIFT_MARGIN = 6.0


@dataclass(frozen=True)
class GridSpec:
    """Periodic grid ``[-L, L)^d`` with ``N`` points per axis."""

    L: float
    N: int
    d: int

    def __post_init__(self):
        if not 1 <= self.d <= 3:
            raise ContractError(f"oracle grids support d <= 3, got d={self.d}")
        if self.N < 64 or self.N & (self.N - 1):
            raise ContractError(f"N must be a power of two >= 64, got {self.N}")
        if not self.L > 0:
            raise ContractError("L must be positive")

    @property
    def h(self):
        return 2 * self.L / self.N

    def axis(self):
        return -self.L + self.h * np.arange(self.N)

    def points(self):
        """Grid nodes, shape (N, ..., N, d)."""
        ax = self.axis()
        return np.stack(np.meshgrid(*([ax] * self.d), indexing="ij"), axis=-1)

    def frequencies(self):
        """Angular frequencies per axis in FFT order."""
        return 2 * np.pi * np.fft.fftfreq(self.N, d=self.h)


def _boundary_max(samples):
    d = samples.ndim
    edges = []
    for ax in range(d):
        edges.append(np.abs(np.take(samples, 0, axis=ax)).max())
        edges.append(np.abs(np.take(samples, -1, axis=ax)).max())
    return max(edges)


def check_decay(samples, tol=BOUNDARY_TOL):
    peak = np.abs(samples).max()
    edge = _boundary_max(samples)
    if peak > 0 and edge > tol * peak:
        raise ConfigurationError(
            f"grid too small: boundary samples reach {edge / peak:.2e} of peak (limit {tol:g})"
        )


def sample_term(term, grid):
    """Initial term on the grid, with the boundary-decay check applied."""
    if term.dim != grid.d:
        raise ContractError(f"term has dimension {term.dim}, grid has {grid.d}")
    samples = term(grid.points())
    check_decay(samples)
    return samples


def check_drift(term, sig, t, grid):
    """Drifted block centers must stay DRIFT_MARGIN sqrt(w) inside the box."""
    drift = term.center + sig.coordinate_signs * t * term.modulation
    margin = DRIFT_MARGIN * math.sqrt(term.width)
    if np.any(np.abs(drift) > grid.L - margin):
        raise ConfigurationError(
            f"drifted center {drift} comes within {margin:.2f} of the grid boundary at t={t}"
        )


def spectral_evolve(samples, sig, t, grid, term=None):
    """Apply ``exp(i t sum_j s_j Laplacian_j / 2)`` as an FFT multiplier.

    ``term``, when given, enables the drift-margin check for that datum.
    """
    samples = np.asarray(samples, dtype=complex)
    if sig.dim != grid.d or samples.shape != (grid.N,) * grid.d:
        raise ContractError("samples, signature and grid dimensions disagree")
    if term is not None:
        check_drift(term, sig, t, grid)
    check_decay(samples)
    k = grid.frequencies()
    signs = sig.coordinate_signs
    Q = np.zeros((grid.N,) * grid.d)
    for ax in range(grid.d):
        shape = [1] * grid.d
        shape[ax] = grid.N
        Q = Q + signs[ax] * (k ** 2).reshape(shape)
    spec = np.fft.fftn(samples)
    return np.fft.ifftn(spec * np.exp(-0.5j * t * Q))


def grid_l2_norm(samples, grid):
    return math.sqrt(float(np.sum(np.abs(samples) ** 2)) * grid.h ** grid.d)


def quad_inner_product(a, b, grid):
    """Grid (trapezoid) quadrature of ``int conj(a) b dx``; spectrally accurate."""
    if a.dim != b.dim:
        raise ContractError("dimension mismatch")
    sa, sb = sample_term(a, grid), sample_term(b, grid)
    return complex(np.sum(np.conj(sa) * sb) * grid.h ** grid.d)


def quad_fourier_transform(g, omega, grid):
    """Grid quadrature of ``int g(x) e^{-i x.w} dx`` for a ComplexGaussian g."""
    x = grid.points().reshape(-1, grid.d)
    vals = g(x)
    omega = np.atleast_2d(omega)
    return (np.exp(-1j * omega @ x.T) @ vals) * grid.h ** grid.d


def quad_frac_deriv_1d(g, x, alpha, half_width, n_nodes):
    """``(2pi)^-1 int |w|^alpha g_hat(w) e^{i x w} dw`` on a uniform w grid (n = 1).

    ``g_hat`` is obtained by direct numeric integration of g, not by the
    closed form, so this is independent of the contour-shift evaluation.
    """
    if g.n != 1:
        raise ContractError("1-d only")
    ys = np.linspace(-half_width, half_width, n_nodes)
    dy = ys[1] - ys[0]
    gv = g(ys[:, None])
    check_decay(gv)
    span = 2 * math.pi / dy
    ws = np.linspace(-span / 2, span / 2, n_nodes, endpoint=False)
    dw = ws[1] - ws[0]
    ghat = np.exp(-1j * np.outer(ws, ys)) @ gv * dy
    return complex(np.sum(np.abs(ws) ** alpha * ghat * np.exp(1j * ws * x)) * dw / (2 * math.pi))


def quad_hs_norm(w, s, lo, hi, n_nodes):
    """Uniform-grid frequency quadrature of the H^s norm of a sum.

    The transform is summed term by term at each frequency node and squared
    there, so cross terms are never expanded analytically.
    """
    from .norms import spectrum

    d = w.signature.dim
    axes = [np.linspace(a, b, n_nodes) for a, b in zip(np.broadcast_to(lo, (d,)), np.broadcast_to(hi, (d,)))]
    cell = math.prod(ax[1] - ax[0] for ax in axes)
    omega = np.stack([g.reshape(-1) for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    weight = (1 + np.sum(omega * omega, axis=1)) ** s
    dens = np.abs(spectrum(w, omega)) ** 2 * weight
    return math.sqrt(float(np.sum(dens)) * cell / (2 * math.pi) ** d)
