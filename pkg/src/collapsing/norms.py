"""Diagonal traces, fractional derivatives and mixed space-time norms.

The diagonal trace of an evolved sum is ``f(t, x) = W(t, x, ..., x)``. Each
term restricts to a complex Gaussian in x, so f, its image under |grad|^a and
its frequency mass are all built from per-term closed forms plus low-order
quadrature.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy.special import erfc

from ._reduce import tree_sum
from .exceptions import ConfigurationError, ContractError
from .gaussian import QuadratureSpec, diagonal_parts, gram_l2_norm, WavepacketSum

DEFAULT_CULL_TOL = 1e-12
# Relative change under resolution doubling above which a norm is flagged.
CONVERGENCE_TOL = 0.01
FREQ_TAIL_BUDGET = 1e-10
# Allowed relative error from the non-analytic point of |w|^alpha.
BRANCH_BUDGET = 1e-12


@dataclass(frozen=True)
class RegionSpec:
    """Space-time box ``[t0, t1] x prod_i [lo_i, hi_i]`` with its quadrature."""

    time_interval: tuple
    space_box: tuple
    t_samples: int = 32
    x_samples: int = 16
    t_rule: str = "midpoint"
    x_rule: str = "gauss-legendre"

    def __post_init__(self):
        t0, t1 = (float(v) for v in self.time_interval)
        if not t0 < t1:
            raise ContractError(f"time interval must satisfy t0 < t1, got {self.time_interval}")
        box = tuple((float(lo), float(hi)) for lo, hi in self.space_box)
        if not box or any(not lo < hi for lo, hi in box):
            raise ContractError(f"space box must be nonempty, got {self.space_box}")
        if self.t_samples < 2 or self.x_samples < 2:
            raise ContractError("need at least 2 samples per axis")
        for rule in (self.t_rule, self.x_rule):
            if rule not in ("midpoint", "gauss-legendre"):
                raise ContractError(f"unknown quadrature rule {rule!r}")
        object.__setattr__(self, "time_interval", (t0, t1))
        object.__setattr__(self, "space_box", box)

    @property
    def n(self):
        return len(self.space_box)

    def refined(self, factor=2):
        return RegionSpec(
            self.time_interval, self.space_box, self.t_samples * factor,
            self.x_samples * factor, self.t_rule, self.x_rule,
        )

    def time_nodes(self):
        return _rule_1d(self.t_rule, self.t_samples, *self.time_interval)

    def space_nodes(self):
        """Tensor nodes of shape (P, n) and weights of shape (P,)."""
        pts, wts = zip(*(_rule_1d(self.x_rule, self.x_samples, lo, hi) for lo, hi in self.space_box))
        grids = np.meshgrid(*pts, indexing="ij")
        wgrids = np.meshgrid(*wts, indexing="ij")
        x = np.stack([g.reshape(-1) for g in grids], axis=1)
        w = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=1), axis=1)
        return x, w

    @property
    def volume(self):
        t0, t1 = self.time_interval
        return (t1 - t0) * math.prod(hi - lo for lo, hi in self.space_box)


def _rule_1d(rule, n, lo, hi):
    if rule == "midpoint":
        h = (hi - lo) / n
        return lo + h * (np.arange(n) + 0.5), np.full(n, h)
    x, w = leggauss(n)
    return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


@dataclass(frozen=True)
class MixedNormSpec:
    """Outer L^p in time, inner L^q in space; ``math.inf`` allowed for either."""

    p: float
    q: float
    region: RegionSpec

    def __post_init__(self):
        if not (self.p >= 1 and self.q >= 1):
            raise ContractError(f"need p, q >= 1, got p={self.p}, q={self.q}")


@dataclass(frozen=True)
class FracDerivSpec:
    """``|grad|^alpha`` in the diagonal variable.

    ``freq_samples`` is the Gauss-Hermite order per axis in the frequency
    integral; ``freq_box_padding`` the half-width (in standard deviations of
    each term's spectral Gaussian) of the box those nodes must fit in.
    """

    alpha: float
    freq_box_padding: float = 12.0
    freq_samples: int = 16

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ContractError(f"alpha must be >= 0, got {self.alpha}")
        if self.freq_samples < 1:
            raise ContractError("freq_samples must be positive")


@dataclass(frozen=True)
class MixedNormResult:
    value: float
    converged: bool
    refined_value: float = None
    rel_change: float = None
    meta: dict = field(default_factory=dict, compare=False)


# ---------------------------------------------------------------------------
# diagonal traces


def _kept_terms(alpha, D, P, x, cull_tol):
    """Boolean mask (K, N) of terms kept at each node, plus log magnitudes."""
    b = (alpha * D).real
    c = P.real - 0.5 * np.sum(alpha * D * D, axis=1).real
    with np.errstate(invalid="ignore"):
        logmag = c[:, None] + b @ x.T - 0.5 * alpha.real * np.sum(x * x, axis=1)[None, :]
    if cull_tol is None:
        return np.isfinite(logmag), logmag
    k = D.shape[0]
    top = np.max(logmag, axis=0)
    keep = logmag >= top[None, :] + math.log(cull_tol / k)
    return keep & np.isfinite(logmag), logmag


def _freq_multiplier(alpha, D, mu, x, kk, nn, deriv):
    """E[(zeta.zeta)^{a/2}], zeta = omega0 + sqrt(alpha) V, V ~ N(0, I).

    The term's Fourier integral of |w|^a against its spectral Gaussian is moved
    by a complex shift and rotation onto a real standard normal.
    """
    n = D.shape[1]
    a = deriv.alpha
    even = float(a / 2).is_integer()
    order = int(a // 2) + 1 if even else deriv.freq_samples
    v, wt = hermegauss(order)
    _check_freq_box(deriv, v, n)
    wt = wt / math.sqrt(2 * math.pi)
    grids = np.meshgrid(*([v] * n), indexing="ij")
    nodes = np.stack([g.reshape(-1) for g in grids], axis=1)
    wgrids = np.meshgrid(*([wt] * n), indexing="ij")
    weights = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=1), axis=1)

    omega0 = 1j * alpha * (x[nn] - D[kk]) + mu[kk]
    zeta = omega0[:, None, :] + np.sqrt(alpha) * nodes[None, :, :]
    zz = np.sum(zeta * zeta, axis=-1)
    if even:
        vals = zz ** int(a // 2)
        return tree_sum(vals * weights[None, :], axis=1)
    # |w|^a is not analytic at w = 0, so the contour shift is exact only up to
    # the spectral mass near the origin, about exp(-|Re omega0|^2 / (2|alpha|)).
    log_cut = -np.sum(omega0.real ** 2, axis=-1) / (2 * abs(alpha))
    if np.any(log_cut > math.log(BRANCH_BUDGET)):
        raise ConfigurationError(
            "diagonal trace has spectral mass near frequency 0, where |w|^alpha "
            "is not analytic; fractional alpha needs frequency-concentrated data"
        )
    vals = np.power(zz, a / 2)
    total = tree_sum(vals * weights[None, :], axis=1)
    # nodes past the cut must not matter: their share of the sum is bounded
    off = tree_sum(np.where(zz.real <= 0, np.abs(vals), 0.0) * weights[None, :], axis=1)
    if np.any(off > BRANCH_BUDGET * np.abs(total)):
        raise ConfigurationError(
            "frequency nodes with non-negligible weight cross the branch cut of "
            "|w|^alpha; lower freq_samples or use integer even alpha"
        )
    return total


def _check_freq_box(deriv, nodes, n):
    pad = deriv.freq_box_padding
    if n * erfc(pad / math.sqrt(2)) > FREQ_TAIL_BUDGET:
        raise ConfigurationError(
            f"frequency box padding {pad} leaves tail mass above {FREQ_TAIL_BUDGET:g}"
        )
    if np.max(np.abs(nodes)) > pad:
        raise ConfigurationError(
            f"{nodes.size} frequency nodes extend past the padded box ({pad} std devs)"
        )


def diagonal_field(w, t, x, deriv=None, cull_tol=DEFAULT_CULL_TOL, chunk=1 << 22):
    """Diagonal trace (or its |grad|^alpha image) at nodes ``x`` of shape (N, n)."""
    if cull_tol is not None and not 0 < cull_tol <= 1e-6:
        raise ContractError(f"cull_tol must lie in (0, 1e-6], got {cull_tol}")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    alpha, D, mu, P = diagonal_parts(w, t)
    if x.shape[1] != D.shape[1]:
        raise ContractError(f"x has dimension {x.shape[1]}, diagonal has {D.shape[1]}")
    k = D.shape[0]
    out = np.empty(x.shape[0], dtype=complex)
    step = max(1, chunk // max(k, 1))
    for start in range(0, x.shape[0], step):
        xs = x[start:start + step]
        keep, _ = _kept_terms(alpha, D, P, xs, cull_tol)
        kk, nn = np.nonzero(keep)
        diff = xs[nn] - D[kk]
        logv = P[kk] - 0.5 * alpha * np.sum(diff * diff, axis=1) + 1j * np.sum(mu[kk] * xs[nn], axis=1)
        vals = np.exp(logv)
        if deriv is not None and deriv.alpha != 0:
            vals = vals * _freq_multiplier(alpha, D, mu, xs, kk, nn, deriv)
        full = np.zeros(keep.shape, dtype=complex)
        full[kk, nn] = vals
        out[start:start + step] = tree_sum(full, axis=0)
    return out


def eval_diagonal(w, t, x, cull_tol=DEFAULT_CULL_TOL):
    """Diagonal trace ``W(t, x, ..., x)``; ``cull_tol=None`` sums every term.

    A term is skipped at x when its magnitude there is below
    ``cull_tol / K`` times the largest term magnitude at x, so the culled
    total differs from the full sum by at most ``cull_tol`` times that
    largest magnitude.
    """
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return complex(diagonal_field(w, t, x, None, cull_tol)[0])


def frac_deriv_diagonal(w, t, x, spec, cull_tol=DEFAULT_CULL_TOL):
    """``(|grad|^alpha f)(t, x)`` for the diagonal trace f."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return complex(diagonal_field(w, t, x, spec, cull_tol)[0])


# ---------------------------------------------------------------------------
# mixed norms


def _lp(values, weights, p):
    if math.isinf(p):
        return float(np.max(values))
    return float(tree_sum(weights * values ** p)) ** (1.0 / p)


def trace_samples(w, region, deriv=None, cull_tol=DEFAULT_CULL_TOL):
    """|f| on the region's tensor nodes, shape (Nt, Nx), plus the node weights."""
    if region.n != w.signature.block_dim:
        raise ContractError(f"region has {region.n} space axes, trace has {w.signature.block_dim}")
    ts, wt = region.time_nodes()
    xs, wx = region.space_nodes()
    vals = np.stack([np.abs(diagonal_field(w, t, xs, deriv, cull_tol)) for t in ts])
    return vals, wt, wx


def mixed_from_samples(vals, wt, wx, p, q):
    inner = np.array([_lp(row, wx, q) for row in vals])
    return _lp(inner, wt, p)


def mixed_norm(w, spec, deriv=None, cull_tol=DEFAULT_CULL_TOL, check_convergence=True):
    """``|| f ||_{L^p(dt) L^q(dx)}`` over ``spec.region`` by tensor quadrature.

    With ``check_convergence`` the norm is recomputed with doubled samples on
    both axes; a relative change above 1% sets ``converged=False``.
    """
    vals, wt, wx = trace_samples(w, spec.region, deriv, cull_tol)
    value = mixed_from_samples(vals, wt, wx, spec.p, spec.q)
    meta = {"t_samples": spec.region.t_samples, "x_samples": spec.region.x_samples}
    if not check_convergence:
        return MixedNormResult(value, True, None, None, meta)
    fine = spec.region.refined()
    vals2, wt2, wx2 = trace_samples(w, fine, deriv, cull_tol)
    refined = mixed_from_samples(vals2, wt2, wx2, spec.p, spec.q)
    change = abs(refined - value) / abs(refined) if refined else abs(value)
    return MixedNormResult(value, bool(change <= CONVERGENCE_TOL), refined, change, meta)


# ---------------------------------------------------------------------------
# Littlewood-Paley split


def _term_boxes(w, padding):
    pad = padding / math.sqrt(w.width)
    return w.modulations - pad, w.modulations + pad


def lp_split(w, cutoff, quad=None, nodes=256):
    """L2 mass of the initial sum below / above the sharp frequency cutoff.

    Each term's spectrum lives (to relative e^{-padding^2}) in a box of
    half-width ``padding / sqrt(width)`` around its modulation. When every box
    falls entirely inside or outside the ball |w| <= cutoff, the two masses
    are closed-form Gram norms of the two sub-sums. Otherwise the spectrum
    |sum_k w_hat_k|^2 is integrated by a Gauss-Legendre tensor rule over the
    bounding box of all term boxes (``nodes`` per axis), split by the
    indicator; ``nodes`` must resolve oscillations at the scale 1/max|center|.
    """
    if not cutoff > 0:
        raise ContractError(f"cutoff must be positive, got {cutoff}")
    quad = quad or QuadratureSpec()
    if quad.padding < 8.3:
        raise ConfigurationError(f"padding {quad.padding} below the 8.3 tail rule")
    lo, hi = _term_boxes(w, quad.padding)
    far = np.sqrt(np.sum(np.maximum(lo ** 2, hi ** 2), axis=1))
    near = np.sqrt(np.sum(np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(lo ** 2, hi ** 2)), axis=1))
    inside = far <= cutoff
    outside = near >= cutoff
    if np.all(inside | outside):
        low = _subsum_mass(w, inside)
        high = _subsum_mass(w, outside)
        return low, high
    return _lp_split_quadrature(w, cutoff, lo.min(axis=0), hi.max(axis=0), nodes)


def _subsum_mass(w, mask):
    if not np.any(mask):
        return 0.0
    sub = WavepacketSum(
        w.signature, w.amplitudes[mask], w.centers[mask], w.modulations[mask], w.width
    )
    return gram_l2_norm(sub) ** 2


def spectrum(w, omega):
    """Exact transform of the initial sum at frequencies ``omega`` (N, d)."""
    omega = np.atleast_2d(omega)
    d = w.signature.dim
    out = np.zeros(omega.shape[0], dtype=complex)
    logpre = 0.5 * d * math.log(2 * math.pi * w.width)
    for a, c, m in zip(w.amplitudes, w.centers, w.modulations):
        diff = omega - m
        out += a * np.exp(logpre - 1j * diff @ c - 0.5 * w.width * np.sum(diff * diff, axis=1))
    return out


def _lp_split_quadrature(w, cutoff, lo, hi, nodes):
    d = w.signature.dim
    pts, wts = zip(*(_rule_1d("gauss-legendre", nodes, a, b) for a, b in zip(lo, hi)))
    grids = np.meshgrid(*pts, indexing="ij")
    wgrids = np.meshgrid(*wts, indexing="ij")
    omega = np.stack([g.reshape(-1) for g in grids], axis=1)
    weight = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=1), axis=1)
    dens = np.abs(spectrum(w, omega)) ** 2 * weight / (2 * math.pi) ** d
    below = np.sum(omega * omega, axis=1) <= cutoff * cutoff
    return float(tree_sum(np.where(below, dens, 0.0))), float(tree_sum(np.where(below, 0.0, dens)))


# ---------------------------------------------------------------------------
# canonical regions


def _block_count(w):
    return len(w.signature.blocks)


def paper_p_region(w, t_samples=32, x_samples=16):
    """Late-time focus region: R - R^{1/2} < t < R and |(x, ..., x)| <= 1/100.

    The spatial part is the cube of half-side 1/(100 sqrt(B n)), which keeps
    the diagonal point inside the 1/100 ball for B blocks of dimension n.
    """
    R = w.meta["R"]
    n = w.signature.block_dim
    h = 0.01 / math.sqrt(_block_count(w) * n)
    return RegionSpec((R - math.sqrt(R), R), tuple((-h, h) for _ in range(n)), t_samples, x_samples)


def paper_q_region(w, t_samples=8, x_samples=256):
    """Early-time region 0 <= t <= 1 over the cube [-R^m, R^m]^n."""
    R, m = w.meta["R"], w.meta["m"]
    n = w.signature.block_dim
    rad = float(R) ** m
    return RegionSpec((0.0, 1.0), tuple((-rad, rad) for _ in range(n)), t_samples, x_samples)
