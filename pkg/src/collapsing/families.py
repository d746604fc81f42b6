"""Deterministic construction of the six counterexample initial-data families.

p-families place R^{1/2}-separated points on a surface of radius ~R and turn
each point P into a tube aimed at the origin: center -P, modulation P/R
(with the sign flipped on minus blocks), width C R. At t = R all tubes meet
near the origin with a common phase.

q-families spread parallel tubes over a lattice in a ball of radius R^m, all
sharing one modulation built from a unit direction.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import norm, qmc

from .exceptions import ConstructionError, ContractError, ResourceError
from .gaussian import BlockSignature, WavepacketSum, tube_constant

P_FAMILIES = ("LambdaP", "GammaP", "GP")
Q_FAMILIES = ("LambdaQ", "GammaQ", "GQ")
FAMILIES = P_FAMILIES + Q_FAMILIES

# Lower edge of the p-family count envelope, as a fraction of R^{n-1/2}.
COUNT_FLOOR_FRACTION = 1.0 / 20
DEFAULT_TERM_CAP = 2 ** 20
# Relative slack added to the required spacing so rounding never breaks it.
_SPACING_SLACK = 1e-9


def signature_for(family, n):
    if family.startswith("Lambda"):
        return BlockSignature.lambda_(n)
    if family.startswith("Gamma"):
        return BlockSignature.gamma(n)
    if family in ("GP", "GQ"):
        return BlockSignature.g(n)
    raise ContractError(f"unknown family {family!r}; expected one of {FAMILIES}")


@dataclass(frozen=True)
class FamilySpec:
    """Parameters of one family instance.

    ``C=None`` resolves to the calibrated tube constant of the family's
    signature. ``direction=None`` resolves to the first basis vector.
    """

    family: str
    n: int = 1
    R: float = 64.0
    C: float = None
    m: int = None
    direction: tuple = None
    coordinate_floor: bool = True
    seed: int = 0
    cap: int = DEFAULT_TERM_CAP

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ContractError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ContractError(f"n must be a positive integer, got {self.n}")
        if not self.R >= 4:
            raise ContractError(f"R must be >= 4, got {self.R}")
        if self.C is not None and not self.C >= 1:
            raise ContractError(f"C must be >= 1, got {self.C}")
        if self.is_q:
            m = 1 if self.m is None else self.m
            if int(m) != m or m < 1:
                raise ContractError(f"m must be an integer >= 1, got {self.m}")
            object.__setattr__(self, "m", int(m))
            xi = self.unit_direction
            if abs(np.linalg.norm(xi) - 1) > 1e-12:
                raise ContractError(f"direction must be a unit vector, got |xi| = {np.linalg.norm(xi)}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "R", float(self.R))

    @property
    def is_q(self):
        return self.family in Q_FAMILIES

    @property
    def signature(self):
        return signature_for(self.family, self.n)

    @property
    def tube_C(self):
        return float(self.C) if self.C is not None else tube_constant(self.signature)

    @property
    def unit_direction(self):
        if self.direction is None:
            xi = np.zeros(self.n)
            xi[0] = 1.0
            return xi
        xi = np.asarray(self.direction, dtype=float).reshape(-1)
        if xi.size != self.n:
            raise ContractError(f"direction must have length n={self.n}")
        return xi

    def with_R(self, R):
        return replace(self, R=R)


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    min_spacing: float
    constraint: str
    params: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return self.points.shape[0]

    def achieved_spacing(self):
        if len(self) < 2:
            return math.inf
        return float(pdist(self.points).min())


# ---------------------------------------------------------------------------
# point placement


def _floor_ok(modulations, n):
    return np.all(modulations >= 1.0 / (10 * n), axis=-1)


def _greedy_thin(candidates, spacing, cap):
    """Keep candidates in stream order that sit >= spacing from all kept ones."""
    need = spacing * (1 + _SPACING_SLACK)
    kept = np.empty((min(cap, len(candidates)), candidates.shape[1]))
    count = 0
    for p in candidates:
        if count:
            diff = kept[:count] - p
            if np.min(np.einsum("ij,ij->i", diff, diff)) < need * need:
                continue
        kept[count] = p
        count += 1
        if count >= cap:
            break
    return kept[:count]


def _sobol_stream(dim, seed, size):
    sampler = qmc.Sobol(dim, scramble=True, seed=seed)
    u = sampler.random_base2(int(math.ceil(math.log2(max(size, 2)))))
    return np.clip(u, 1e-12, 1 - 1e-12)


def _directions(u, floor_sign):
    """Unit vectors from uniform columns; ``floor_sign`` pins the orthant."""
    g = norm.ppf(u)
    if floor_sign:
        g = floor_sign * np.abs(g)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _stream_budget(cap):
    return int(min(max(4096, 64 * cap), 1 << 20))


def sphere_points(R, n, seed=0, floor=True):
    """R^{1/2}-separated points on the sphere |(x, y)| = R in R^{2n}.

    n = 1: an evenly spaced arc grid (chord >= R^{1/2}) on the admissible arc.
    n >= 2: greedy thinning of a scrambled Sobol stream mapped to the sphere.
    The count never exceeds ceil(R^{n-1/2}).
    """
    if not R >= 4:
        raise ContractError(f"R must be >= 4, got {R}")
    spacing = math.sqrt(R)
    cap = math.ceil(R ** (n - 0.5))
    if n == 1:
        min_step = 2 * math.asin(spacing / (2 * R)) * (1 + _SPACING_SLACK)
        if floor:
            lo, hi = math.asin(0.1), math.acos(0.1)
            arc = hi - lo
            if arc < 0:
                raise ConstructionError("admissible arc is empty", achieved=0)
            count = min(int(math.floor(arc / min_step)) + 1, cap)
            if count == 1:
                theta = np.array([0.5 * (lo + hi)])
            else:
                theta = lo + arc * np.arange(count) / (count - 1)
        else:
            count = min(int(math.floor(2 * math.pi / min_step)), cap)
            theta = 2 * math.pi * np.arange(count) / count
        pts = R * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    else:
        u = _sobol_stream(2 * n, seed, _stream_budget(cap))
        pts = R * _directions(u, 1 if floor else 0)
        if floor:
            pts = pts[_floor_ok(pts / R, n)]
        pts = _greedy_thin(pts, spacing, cap)
    if len(pts) == 0:
        raise ConstructionError("no admissible sphere points under the coordinate floor", achieved=0)
    return PointCloud(pts, spacing, f"sphere radius {R:g}", {"R": R, "n": n})


def gamma_surface_points(R, n, seed=0, floor=True):
    """R^{1/2}-separated points on {|x| = |y|, R/2 <= |x| <= R} in R^{2n}.

    With the floor, coordinates of x/R and of -y/R are >= 1/(10 n).
    """
    if not R >= 4:
        raise ContractError(f"R must be >= 4, got {R}")
    spacing = math.sqrt(R)
    cap = math.ceil(R ** (n - 0.5))
    if n == 1:
        # segments r (u, v), r in [R/2, R]; distance along a segment is sqrt(2) dr
        patterns = [(1, -1)] if floor else [(1, 1), (1, -1), (-1, 1), (-1, -1)]
        dr = spacing / math.sqrt(2) * (1 + _SPACING_SLACK)
        per_seg = int(math.floor((R / 2) / dr)) + 1
        per_seg = max(1, min(per_seg, cap // len(patterns)))
        if per_seg == 1:
            r = np.array([0.75 * R])
        else:
            r = R / 2 + (R / 2) * np.arange(per_seg) / (per_seg - 1)
        pts = np.concatenate([np.stack([u * r, v * r], axis=1) for u, v in patterns])
    else:
        u = _sobol_stream(1 + 2 * n, seed, _stream_budget(cap))
        r = R / 2 + (R / 2) * u[:, :1]
        x = r * _directions(u[:, 1:1 + n], 1 if floor else 0)
        y = r * _directions(u[:, 1 + n:], -1 if floor else 0)
        pts = np.concatenate([x, y], axis=1)
        if floor:
            mod = np.concatenate([x, -y], axis=1) / R
            pts = pts[_floor_ok(mod, n)]
        pts = _greedy_thin(pts, spacing, cap)
    if len(pts) == 0:
        raise ConstructionError("no admissible points on |x| = |y| under the coordinate floor", achieved=0)
    return PointCloud(pts, spacing, "surface |x|=|y|, R/2<=|x|<=R", {"R": R, "n": n})


def cone_points(R, n, seed=0, floor=True):
    """R^{1/2}-separated points on {|x|^2 + |y|^2 = |z|^2, R/2 <= |x|, |y| <= R}.

    Greedy thinning of a Sobol stream of (|x|, |y|, directions); z is placed
    exactly on the cone. Count never exceeds ceil(R^{(3n-1)/2}).
    """
    if not R >= 4:
        raise ContractError(f"R must be >= 4, got {R}")
    spacing = math.sqrt(R)
    cap = math.ceil(R ** ((3 * n - 1) / 2))
    u = _sobol_stream(2 + 3 * n, seed, _stream_budget(cap))
    rx = R / 2 + (R / 2) * u[:, :1]
    ry = R / 2 + (R / 2) * u[:, 1:2]
    sign_xy, sign_z = (1, -1) if floor else (0, 0)
    x = rx * _directions(u[:, 2:2 + n], sign_xy)
    y = ry * _directions(u[:, 2 + n:2 + 2 * n], sign_xy)
    z = np.sqrt(rx ** 2 + ry ** 2) * _directions(u[:, 2 + 2 * n:], sign_z)
    pts = np.concatenate([x, y, z], axis=1)
    if floor:
        mod = np.concatenate([x, y, -z], axis=1) / R
        pts = pts[_floor_ok(mod, n)]
    pts = _greedy_thin(pts, spacing, cap)
    if len(pts) == 0:
        raise ConstructionError("no admissible cone points under the coordinate floor", achieved=0)
    return PointCloud(pts, spacing, "cone |x|^2+|y|^2=|z|^2", {"R": R, "n": n})


def lattice_count_estimate(R, m, n):
    """Approximate number of lattice points: ball volume / cell volume."""
    ball = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    return ball * R ** (m * n - n / 2)


def ball_lattice_points(R, m, n, cap=DEFAULT_TERM_CAP):
    """Cubic lattice of step R^{1/2} inside the ball of radius R^m in R^n."""
    if m < 1:
        raise ContractError(f"m must be >= 1, got {m}")
    step = math.sqrt(R)
    radius = float(R) ** m
    J = int(math.floor(radius / step * (1 + 1e-12)))
    axis_pts = 2 * J + 1
    if lattice_count_estimate(R, m, n) > 1.5 * cap or axis_pts ** n > 64 * cap:
        raise ResourceError(
            f"lattice needs about {lattice_count_estimate(R, m, n):.0f} points; cap is {cap}",
            required=int(lattice_count_estimate(R, m, n)),
        )
    idx = np.arange(-J, J + 1)
    grids = np.meshgrid(*([idx] * n), indexing="ij")
    pts = step * np.stack([g.reshape(-1) for g in grids], axis=1)
    r2 = np.sum(pts * pts, axis=1)
    pts = pts[r2 <= radius * radius * (1 + 1e-12)]
    if len(pts) > cap:
        raise ResourceError(f"lattice has {len(pts)} points; cap is {cap}", required=len(pts))
    return PointCloud(pts, step, f"ball radius {radius:g}", {"R": R, "m": m, "n": n})


# ---------------------------------------------------------------------------
# family builders


def _meta(spec, cloud):
    return {
        "family": spec.family, "n": spec.n, "R": spec.R, "C": spec.tube_C,
        "m": spec.m if spec.is_q else None, "seed": spec.seed,
        "coordinate_floor": spec.coordinate_floor if not spec.is_q else None,
        "min_spacing": cloud.min_spacing, "constraint": cloud.constraint,
    }


def _require(spec, family):
    if spec.family != family:
        raise ContractError(f"expected a {family} spec, got {spec.family}")


def _p_family(spec, cloud):
    sig = spec.signature
    pts = cloud.points
    mods = pts * sig.coordinate_signs / spec.R
    return WavepacketSum(
        sig, np.ones(len(pts)), -pts, mods, spec.tube_C * spec.R, _meta(spec, cloud)
    )


def build_lambda_p(spec):
    _require(spec, "LambdaP")
    cloud = sphere_points(spec.R, spec.n, spec.seed, spec.coordinate_floor)
    return _p_family(spec, cloud)


def build_gamma_p(spec):
    _require(spec, "GammaP")
    cloud = gamma_surface_points(spec.R, spec.n, spec.seed, spec.coordinate_floor)
    return _p_family(spec, cloud)


def build_g_p(spec):
    _require(spec, "GP")
    cloud = cone_points(spec.R, spec.n, spec.seed, spec.coordinate_floor)
    return _p_family(spec, cloud)


def _q_family(spec, block_mods):
    sig = spec.signature
    cloud = ball_lattice_points(spec.R, spec.m, spec.n, spec.cap)
    k = len(cloud)
    blocks = len(sig.blocks)
    centers = -np.tile(cloud.points, (1, blocks))
    mods = np.tile(np.concatenate(block_mods), (k, 1))
    return WavepacketSum(sig, np.ones(k), centers, mods, spec.tube_C * spec.R, _meta(spec, cloud))


def build_lambda_q(spec):
    _require(spec, "LambdaQ")
    xi = spec.unit_direction
    return _q_family(spec, [xi, xi])


def build_gamma_q(spec):
    _require(spec, "GammaQ")
    xi = spec.unit_direction
    return _q_family(spec, [xi, np.zeros_like(xi)])


def build_g_q(spec):
    _require(spec, "GQ")
    xi = spec.unit_direction
    return _q_family(spec, [xi, xi, -xi])


_BUILDERS = {
    "LambdaP": build_lambda_p, "LambdaQ": build_lambda_q,
    "GammaP": build_gamma_p, "GammaQ": build_gamma_q,
    "GP": build_g_p, "GQ": build_g_q,
}


def build_family(spec):
    return _BUILDERS[spec.family](spec)


def count_envelope(spec):
    """Expected ``(low, high)`` term counts for ``spec``.

    p-families: [R^e / 20, ceil(R^e)] with e = n - 1/2 (Lambda, Gamma) or
    (3n - 1)/2 (G). q-families: within a factor 2 of the lattice estimate
    (unit-ball volume) * R^{mn - n/2}.
    """
    n, R = spec.n, spec.R
    if spec.is_q:
        est = lattice_count_estimate(R, spec.m, n)
        return est / 2, 2 * est
    e = (3 * n - 1) / 2 if spec.family == "GP" else n - 0.5
    return max(1.0, math.floor(COUNT_FLOOR_FRACTION * R ** e)), math.ceil(R ** e)
