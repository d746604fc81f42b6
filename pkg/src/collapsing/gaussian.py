"""Closed-form algebra of modulated Gaussians under mixed-signature free flow.

A term is ``amplitude * exp(i x.modulation) * exp(-|x - center|^2 / (2 width))``
on R^d, where R^d is split into blocks carrying Laplacian signs +1 or -1. The
flow ``exp(i t sum_j s_j Laplacian_j / 2)`` acts blockwise, so every formula
here is a product over blocks of the classical one-block propagator.

Fourier convention: ``g_hat(w) = int g(x) exp(-i x.w) dx``, inverse carries
``(2 pi)^-n``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.spatial import cKDTree
from scipy.special import erfc

from ._reduce import tree_sum
from .exceptions import ConfigurationError, ContractError

# Pairs whose Gaussian overlap exponent exceeds this are dropped (e^-50 ~ 2e-22).
PAIR_LOG_CUT = 50.0
# Above this many terms, candidate pairs come from a KD-tree on the centers.
DENSE_PAIR_LIMIT = 2048


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BlockSignature:
    """Ordered blocks ``(dim, sign)``; sign +1 or -1 on that block's Laplacian."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple((int(n), int(s)) for n, s in self.blocks)
        if not blocks:
            raise ContractError("a signature needs at least one block")
        for n, s in blocks:
            if n < 1:
                raise ContractError(f"block dimension must be positive, got {n}")
            if s not in (1, -1):
                raise ContractError(f"block sign must be +1 or -1, got {s}")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def lambda_(cls, n):
        return cls(((n, 1), (n, 1)))

    @classmethod
    def gamma(cls, n):
        return cls(((n, 1), (n, -1)))

    @classmethod
    def g(cls, n):
        return cls(((n, 1), (n, 1), (n, -1)))

    @property
    def dim(self):
        return sum(n for n, _ in self.blocks)

    @property
    def slices(self):
        out, start = [], 0
        for n, _ in self.blocks:
            out.append(slice(start, start + n))
            start += n
        return out

    @property
    def signs(self):
        return [s for _, s in self.blocks]

    @property
    def coordinate_signs(self):
        """Sign of each of the ``dim`` coordinates."""
        return np.concatenate([np.full(n, s, dtype=float) for n, s in self.blocks])

    @property
    def block_dim(self):
        """Common block dimension; raises if blocks differ."""
        dims = {n for n, _ in self.blocks}
        if len(dims) != 1:
            raise ContractError(f"blocks have unequal dimensions {sorted(dims)}")
        return dims.pop()

    def quadratic(self, modulation):
        """Q(mu) = sum_j s_j |mu_j|^2, vectorised over leading axes."""
        mu = np.asarray(modulation, dtype=float)
        return np.sum(mu * mu * self.coordinate_signs, axis=-1)

    def to_list(self):
        return [list(b) for b in self.blocks]


@dataclass(frozen=True)
class GaussianTerm:
    amplitude: complex
    center: np.ndarray
    modulation: np.ndarray
    width: float

    def __post_init__(self):
        c = _readonly(self.center, float).reshape(-1)
        m = _readonly(self.modulation, float).reshape(-1)
        if c.shape != m.shape:
            raise ContractError("center and modulation must have the same length")
        if not self.width > 0:
            raise ContractError(f"width must be positive, got {self.width}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "modulation", m)
        object.__setattr__(self, "amplitude", complex(self.amplitude))
        object.__setattr__(self, "width", float(self.width))

    @property
    def dim(self):
        return self.center.size

    def __call__(self, points):
        x = np.asarray(points, dtype=float)
        r2 = np.sum((x - self.center) ** 2, axis=-1)
        return self.amplitude * np.exp(1j * (x @ self.modulation) - r2 / (2 * self.width))


@dataclass(frozen=True)
class WavepacketSum:
    """A finite sum of terms sharing one width, stored as stacked arrays.

    ``meta`` carries the family tag and construction parameters (R, C, m, n).
    """

    signature: BlockSignature
    amplitudes: np.ndarray
    centers: np.ndarray
    modulations: np.ndarray
    width: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        a = _readonly(self.amplitudes, complex).reshape(-1)
        c = _readonly(self.centers, float)
        m = _readonly(self.modulations, float)
        d = self.signature.dim
        k = a.size
        if c.shape != (k, d) or m.shape != (k, d):
            raise ContractError(
                f"expected centers/modulations of shape ({k}, {d}), got {c.shape} and {m.shape}"
            )
        if not self.width > 0:
            raise ContractError("width must be positive")
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "modulations", m)
        object.__setattr__(self, "width", float(self.width))

    @classmethod
    def from_terms(cls, signature, terms, meta=None):
        terms = list(terms)
        if not terms:
            raise ContractError("need at least one term")
        widths = {t.width for t in terms}
        if len(widths) != 1:
            raise ContractError("all terms of a sum must share one width")
        return cls(
            signature,
            [t.amplitude for t in terms],
            np.stack([t.center for t in terms]),
            np.stack([t.modulation for t in terms]),
            widths.pop(),
            dict(meta or {}),
        )

    def __len__(self):
        return self.amplitudes.size

    @property
    def terms(self):
        return [
            GaussianTerm(a, c, m, self.width)
            for a, c, m in zip(self.amplitudes, self.centers, self.modulations)
        ]

    def scaled(self, factor):
        return WavepacketSum(
            self.signature, self.amplitudes * factor, self.centers, self.modulations,
            self.width, dict(self.meta),
        )

    def __call__(self, points):
        """Initial value at ``points`` of shape (..., d)."""
        return evolve_sum(self, 0.0, points)


@dataclass(frozen=True)
class ComplexGaussian:
    """``gamma * exp(-(alpha/2)|x|^2 + beta.x)`` on R^n with Re(alpha) > 0.

    The prefactor is stored as ``log_gamma`` so far-translated terms do not
    underflow before they are combined with the exponent.
    """

    alpha: complex
    beta: np.ndarray
    log_gamma: complex = 0j

    def __post_init__(self):
        alpha = complex(self.alpha)
        if not alpha.real > 0:
            raise ContractError(f"Re(alpha) must be positive, got {alpha}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", _readonly(self.beta, complex).reshape(-1))
        object.__setattr__(self, "log_gamma", complex(self.log_gamma))

    @classmethod
    def from_gamma(cls, gamma, alpha, beta):
        return cls(alpha, beta, np.log(complex(gamma)))

    @property
    def n(self):
        return self.beta.size

    @property
    def gamma(self):
        return np.exp(self.log_gamma)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        q = np.sum(x * x, axis=-1)
        return np.exp(self.log_gamma - 0.5 * self.alpha * q + x @ self.beta)


# ---------------------------------------------------------------------------
# evolution


def _check_dim(sig, d):
    if d != sig.dim:
        raise ContractError(f"point has dimension {d}, signature has dimension {sig.dim}")


def _evolved_log(centers, modulations, width, sig, t, points, branch_sign=1):
    """Log of each unit-amplitude evolved term at each point, shape (K, P).

    ``branch_sign=-1`` takes the prefactor root on the wrong side of the cut;
    it exists only so the check suite can prove it detects such a fault.
    """
    t = float(t)
    k = centers.shape[0]
    out = np.zeros((k, points.shape[0]), dtype=complex)
    out += (-0.5j * t * sig.quadratic(modulations))[:, None]
    out += 1j * (modulations @ points.T)
    for (n, s), sl in zip(sig.blocks, sig.slices):
        z = width + s * 1j * t
        drift = centers[:, sl] + s * t * modulations[:, sl]
        diff = points[None, :, sl] - drift[:, None, :]
        out += -np.sum(diff * diff, axis=-1) / (2 * z)
        out += -0.5 * n * np.log(1 + branch_sign * s * 1j * t / width)
    return out


def evolve_eval(term, sig, t, point):
    """Exact value of the evolved term at ``(t, point)``."""
    x = np.asarray(point, dtype=float).reshape(-1)
    _check_dim(sig, x.size)
    _check_dim(sig, term.dim)
    lg = _evolved_log(term.center[None], term.modulation[None], term.width, sig, t, x[None])
    return complex(term.amplitude * np.exp(lg[0, 0]))


def evolve_terms(w, t, points):
    """Evolved value of every term at every point, shape (K, P)."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    _check_dim(w.signature, x.shape[-1])
    lg = _evolved_log(w.centers, w.modulations, w.width, w.signature, t, x)
    return w.amplitudes[:, None] * np.exp(lg)


def evolve_sum(w, t, points):
    """Evolved sum at ``points`` (shape (..., d)); returns shape (...)."""
    x = np.asarray(points, dtype=float)
    lead = x.shape[:-1]
    flat = x.reshape(-1, x.shape[-1])
    vals = tree_sum(evolve_terms(w, t, flat), axis=0)
    return vals.reshape(lead)


# ---------------------------------------------------------------------------
# inner products and Gram norms


def _pair_log(ca, cb, ma, mb, width):
    """Log of <a, b> / (conj(amp_a) amp_b (pi w)^{d/2}) for stacked pairs."""
    dc = ca - cb
    delta = mb - ma
    cbar = 0.5 * (ca + cb)
    return (
        -np.sum(dc * dc, axis=-1) / (4 * width)
        - width * np.sum(delta * delta, axis=-1) / 4
        + 1j * np.sum(cbar * delta, axis=-1)
    )


def inner_product(a, b):
    """Exact L2 inner product over R^d, first argument conjugated."""
    if a.dim != b.dim:
        raise ContractError(f"dimension mismatch {a.dim} vs {b.dim}")
    if a.width != b.width:
        raise ContractError(f"width mismatch {a.width} vs {b.width}")
    w = a.width
    lg = _pair_log(a.center, b.center, a.modulation, b.modulation, w)
    return complex(np.conj(a.amplitude) * b.amplitude * (math.pi * w) ** (a.dim / 2) * np.exp(lg))


def gram_matrix(w):
    """Dense Gram matrix ``G[k, l] = <term_k, term_l>``; for small sums only."""
    c, m = w.centers, w.modulations
    lg = _pair_log(c[:, None, :], c[None, :, :], m[:, None, :], m[None, :, :], w.width)
    scale = (math.pi * w.width) ** (w.signature.dim / 2)
    return np.conj(w.amplitudes)[:, None] * w.amplitudes[None, :] * scale * np.exp(lg)


def significant_pairs(w, log_cut=PAIR_LOG_CUT):
    """Index pairs ``i < j`` whose overlap exponent is at most ``log_cut``.

    Dropped pairs satisfy |<i, j>| <= |a_i||a_j| (pi w)^{d/2} e^{-log_cut}.
    Output is sorted lexicographically, so it does not depend on tree layout.
    """
    k = len(w)
    c, m, width = w.centers, w.modulations, w.width
    if k < 2:
        empty = np.zeros(0, dtype=np.intp)
        return empty, empty
    if k <= DENSE_PAIR_LIMIT:
        i, j = np.triu_indices(k, 1)
    else:
        radius = math.sqrt(4 * width * log_cut)
        pairs = cKDTree(c).query_pairs(radius, output_type="ndarray")
        if pairs.size == 0:
            empty = np.zeros(0, dtype=np.intp)
            return empty, empty
        pairs = np.sort(pairs, axis=1)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        i, j = pairs[order, 0], pairs[order, 1]
    dc = c[i] - c[j]
    dm = m[j] - m[i]
    expo = np.sum(dc * dc, axis=1) / (4 * width) + width * np.sum(dm * dm, axis=1) / 4
    keep = expo <= log_cut
    return i[keep], j[keep]


def _pair_values(w, i, j):
    lg = _pair_log(w.centers[i], w.centers[j], w.modulations[i], w.modulations[j], w.width)
    scale = (math.pi * w.width) ** (w.signature.dim / 2)
    return np.conj(w.amplitudes[i]) * w.amplitudes[j] * scale * np.exp(lg)


def gram_l2_norm(w):
    """``sqrt(sum_{k,l} <term_k, term_l>)`` from the pairwise closed form."""
    if len(w) == 0:
        raise ContractError("empty sum")
    scale = (math.pi * w.width) ** (w.signature.dim / 2)
    diag = tree_sum(np.abs(w.amplitudes) ** 2) * scale
    i, j = significant_pairs(w)
    off = tree_sum(_pair_values(w, i, j)).real if i.size else 0.0
    return math.sqrt(max(float(diag + 2 * off), 0.0))


# ---------------------------------------------------------------------------
# diagonal restriction and Fourier transforms


def _block_factors(sig, width, t):
    """Per block: a_j = 1/(w + s_j i t) and log prefactor -n_j/2 log(1 + s_j i t / w)."""
    a = np.array([1.0 / (width + s * 1j * t) for _, s in sig.blocks])
    logpre = sum(-0.5 * n * np.log(1 + s * 1j * t / width) for n, s in sig.blocks)
    return a, logpre


def diagonal_restrict(term, sig, t):
    """Evolved term restricted to ``(x, x, ..., x)`` as a ComplexGaussian in x."""
    n = sig.block_dim
    _check_dim(sig, term.dim)
    t = float(t)
    a, logpre = _block_factors(sig, term.width, t)
    alpha = complex(np.sum(a))
    beta = np.zeros(n, dtype=complex)
    log_gamma = np.log(term.amplitude + 0j) - 0.5j * t * sig.quadratic(term.modulation) + logpre
    for aj, (_, s), sl in zip(a, sig.blocks, sig.slices):
        d = term.center[sl] + s * t * term.modulation[sl]
        beta += aj * d + 1j * term.modulation[sl]
        log_gamma += -0.5 * aj * np.dot(d, d)
    return ComplexGaussian(alpha, beta, log_gamma)


def diagonal_parts(w, t):
    """Stable diagonal form of every term of ``w`` at time ``t``.

    Returns ``(alpha, D, mu, P)`` such that term k on the diagonal equals
    ``exp(P_k - (alpha/2)(x - D_k).(x - D_k) + i mu_k.x)``. Here D_k is the
    a_j-weighted mean of the drifted block centers and mu_k the summed block
    modulation; the large-translation parts cancel analytically instead of in
    floating point.
    """
    sig = w.signature
    n = sig.block_dim
    t = float(t)
    a, logpre = _block_factors(sig, w.width, t)
    alpha = complex(np.sum(a))
    k = len(w)
    drifts = []
    mu = np.zeros((k, n))
    for (_, s), sl in zip(sig.blocks, sig.slices):
        drifts.append(w.centers[:, sl] + s * t * w.modulations[:, sl])
        mu += w.modulations[:, sl]
    D = sum(aj * d for aj, d in zip(a, drifts)) / alpha
    spread = sum(aj * np.sum((d - D) ** 2, axis=1) for aj, d in zip(a, drifts))
    with np.errstate(divide="ignore"):
        log_amp = np.log(w.amplitudes + 0j)
    P = log_amp - 0.5j * t * sig.quadratic(w.modulations) + logpre - 0.5 * spread
    return alpha, D, mu, P


def fourier_transform(g):
    """``g_hat(w) = int g(x) e^{-i x.w} dx`` in closed form."""
    n = g.n
    log_gamma = g.log_gamma + 0.5 * n * np.log(2 * np.pi / g.alpha) + np.dot(g.beta, g.beta) / (2 * g.alpha)
    return ComplexGaussian(1.0 / g.alpha, -1j * g.beta / g.alpha, log_gamma)


def inverse_fourier_transform(g):
    """``(2 pi)^{-n} int g(w) e^{i x.w} dw`` in closed form."""
    n = g.n
    log_gamma = (
        g.log_gamma
        + 0.5 * n * np.log(2 * np.pi / g.alpha)
        + np.dot(g.beta, g.beta) / (2 * g.alpha)
        - n * np.log(2 * np.pi)
    )
    return ComplexGaussian(1.0 / g.alpha, 1j * g.beta / g.alpha, log_gamma)


def hermitian_symmetrize(w):
    """Return ``(K(x, y) + conj(K(y, x))) / 2`` for a two-block kernel sum."""
    sig = w.signature
    if len(sig.blocks) != 2:
        raise ContractError("hermitian symmetrisation needs exactly two blocks")
    n = sig.block_dim
    c, m = w.centers, w.modulations
    swapped_c = np.concatenate([c[:, n:], c[:, :n]], axis=1)
    swapped_m = -np.concatenate([m[:, n:], m[:, :n]], axis=1)
    return WavepacketSum(
        sig,
        np.concatenate([w.amplitudes, np.conj(w.amplitudes)]) / 2,
        np.concatenate([c, swapped_c]),
        np.concatenate([m, swapped_m]),
        w.width,
        dict(w.meta, hermitian=True),
    )


# ---------------------------------------------------------------------------
# Sobolev norms


@dataclass(frozen=True)
class QuadratureSpec:
    """Frequency quadrature settings for H^s norms.

    ``nodes`` is the Gauss-Hermite order per axis for non-integer s (integer s
    uses the exact order s + 1). ``padding`` is the half-width, in units of
    ``width**-0.5``, of the frequency box each pair integral is confined to;
    ``box`` optionally pins an explicit global frequency box ``(lo, hi)``.
    """

    nodes: int = 8
    padding: float = 12.0
    box: tuple = None


# Gaussian tail of |w_hat|^2 beyond the padding must stay below this.
TAIL_BUDGET = 1e-30


def _check_padding(w, quad, nodes):
    d = w.signature.dim
    if d * erfc(quad.padding) > TAIL_BUDGET:
        raise ConfigurationError(
            f"padding {quad.padding} leaves Gaussian tail mass above {TAIL_BUDGET:g}; "
            "use padding >= 8.3"
        )
    outer = float(np.max(np.abs(hermgauss(nodes)[0])))
    if outer > quad.padding:
        raise ConfigurationError(
            f"{nodes} Gauss-Hermite nodes reach {outer:.2f} > padding {quad.padding}"
        )
    if quad.box is not None:
        lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (d,)) for b in quad.box)
        pad = quad.padding / math.sqrt(w.width)
        need_lo = w.modulations.min(axis=0) - pad
        need_hi = w.modulations.max(axis=0) + pad
        if np.any(lo > need_lo) or np.any(hi < need_hi):
            raise ConfigurationError(
                "frequency box does not cover all modulations padded by "
                f"{quad.padding}/sqrt(width)"
            )


def _sobolev_weights(z, s, nodes, width, chunk=1 << 21):
    """E[<z + V>^{2s}] for V ~ N(0, I/(2 width)), by tensor Gauss-Hermite.

    ``z`` has shape (P, d) and is complex: the pair integrand
    exp(-w|u - mean|^2 + i u.dc) is moved onto the real line by shifting the
    contour to ``mean + i dc / (2w)``.
    """
    d = z.shape[1]
    x, wt = hermgauss(nodes)
    x = x / math.sqrt(width)
    wt = wt / math.sqrt(math.pi)
    grids = np.meshgrid(*([x] * d), indexing="ij")
    u = np.stack([g.reshape(-1) for g in grids], axis=1)
    wgrids = np.meshgrid(*([wt] * d), indexing="ij")
    weights = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=1), axis=1)
    integer = float(s).is_integer()
    out = np.empty(z.shape[0], dtype=complex)
    step = max(1, chunk // u.shape[0])
    for start in range(0, z.shape[0], step):
        zz = z[start:start + step, None, :] + u[None, :, :]
        base = 1 + np.sum(zz * zz, axis=-1)
        vals = base ** int(s) if integer else np.power(base, s)
        out[start:start + step] = tree_sum(vals * weights[None, :], axis=1)
    return out


def hs_norm(w, s, quad=None):
    """``(int <w>^{2s} |w0_hat|^2 dw / (2pi)^d)^{1/2}`` of the initial sum.

    Expands |sum_k w_hat_k|^2 into pair integrals, each a Gaussian localised
    at the mean of the two modulations (width ``w**-0.5``) times ``<w>^{2s}``,
    and integrates each by shifted-contour Gauss-Hermite quadrature.
    Negligible pairs are skipped with the same cut as ``gram_l2_norm``.
    """
    if s < 0:
        raise ContractError(f"s must be nonnegative, got {s}")
    quad = quad or QuadratureSpec()
    integer = float(s).is_integer()
    nodes = int(s) + 1 if integer else quad.nodes
    _check_padding(w, quad, nodes)
    width = w.width
    scale = (math.pi * width) ** (w.signature.dim / 2)

    diag_z = w.modulations.astype(complex)
    diag = np.abs(w.amplitudes) ** 2 * scale * _sobolev_weights(diag_z, s, nodes, width).real
    total = tree_sum(diag)

    i, j = significant_pairs(w)
    if i.size:
        dc = w.centers[i] - w.centers[j]
        z = 0.5 * (w.modulations[i] + w.modulations[j]) + 1j * dc / (2 * width)
        if not integer and np.max(np.sum(z.imag ** 2, axis=1)) >= 0.9:
            raise ConfigurationError(
                "contour shift reaches the branch points of <w>^{2s}; "
                "non-integer s needs width >= ~60 for this sum"
            )
        pair = _pair_values(w, i, j) * _sobolev_weights(z, s, nodes, width)
        total = total + 2 * tree_sum(pair).real
    return math.sqrt(max(float(total), 0.0))


# ---------------------------------------------------------------------------
# tube calibration


def _min_real_tube(C, signs, n, n_tau=201, n_r=11):
    tau = np.linspace(0.0, 1.0 / C, n_tau)
    rr = np.linspace(0.0, 1.0, n_r)
    grids = np.meshgrid(*([rr] * len(signs)), indexing="ij")
    val = np.ones((n_tau,) + grids[0].shape, dtype=complex)
    ta = tau.reshape((-1,) + (1,) * len(signs))
    for s, g in zip(signs, grids):
        z = 1 + s * 1j * ta
        val = val * z ** (-n / 2) * np.exp(-g[None] / (2 * C * z))
    return float(val.real.min())


@lru_cache(maxsize=None)
def _tube_constant(blocks, margin):
    sig = BlockSignature(blocks)
    n = sig.block_dim
    signs = tuple(sig.signs)
    lo, hi = 0.5, 64.0
    if _min_real_tube(hi, signs, n) < 0.5:
        raise ConfigurationError("no tube constant below 64 keeps Re F >= 1/2")
    while hi - lo > 1e-3:
        mid = 0.5 * (lo + hi)
        if _min_real_tube(mid, signs, n) >= 0.5:
            hi = mid
        else:
            lo = mid
    return math.ceil(margin * hi * 100) / 100


def tube_constant(sig, margin=1.1):
    """Smallest C (times ``margin``) with Re F >= 1/2 on the tube.

    F is the evolved unmodulated centered Gaussian of width C R, and the tube
    is ``|x_j| <= R^{1/2}`` per block, ``0 <= t <= R``. The condition depends
    on (t/(CR), |x_j|^2/R) only, so C is independent of R.
    """
    return _tube_constant(sig.blocks, float(margin))
