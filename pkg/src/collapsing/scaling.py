"""R-scans of collapsing-estimate ratios and log-log slope verdicts.

For each scale R a family is built, the left side is the mixed norm of the
(differentiated) diagonal trace over a lower-bound region and the right side
is the H^s norm of the initial data. A positive slope of log(lhs/rhs) against
log R means no constant can bound the ratio.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy.stats import linregress

from .exceptions import ContractError
from .families import FAMILIES, P_FAMILIES, FamilySpec, build_family
from .gaussian import QuadratureSpec, hs_norm
from .norms import (
    CONVERGENCE_TOL, DEFAULT_CULL_TOL, FracDerivSpec, MixedNormSpec, RegionSpec,
    mixed_norm, paper_p_region, paper_q_region,
)

BLOW_UP = "blow-up-consistent"
BOUNDED = "bounded-consistent"
INCONCLUSIVE = "inconclusive"
# Slopes below this are read as bounded at desk scale.
BOUNDED_MARGIN = 0.05


def predicted_slope(family, p, q, n=1, m=1):
    """Exponent of lhs/rhs in R implied by the family's lower and upper bounds.

    p-families: lhs ~ R^{1/(2p)} * (coherent count), rhs ~ sqrt(count) * R^{B n/4},
    giving 1/(2p) - 1/4 for all three signatures. q-families: lhs ~ R^{mn/q}
    against rhs ~ R^{mn/2 + n/4} (Lambda, Gamma) or R^{mn/2 + n/2} (G).
    """
    if family not in FAMILIES:
        raise ContractError(f"unknown family {family!r}")
    if family in P_FAMILIES:
        return 1.0 / (2 * p) - 0.25
    offset = n / 2 if family == "GQ" else n / 4
    return m * n / q - m * n / 2 - offset


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float


def fit_slope(R, ratio):
    """Ordinary least squares of log(ratio) on log(R)."""
    R = np.asarray(R, dtype=float)
    ratio = np.asarray(ratio, dtype=float)
    if R.size < 3:
        raise ContractError("need at least three scales for a slope fit")
    if np.any(ratio <= 0) or np.any(R <= 0):
        raise ContractError("scales and ratios must be positive")
    fit = linregress(np.log(R), np.log(ratio))
    return SlopeFit(float(fit.slope), float(fit.intercept), float(fit.stderr))


def classify(slope, stderr, converged=True):
    """Two-sigma verdict on the sign of a fitted slope.

    Bounded is tested first: a slope that is significantly positive but still
    below the 0.05 desk margin counts as bounded.
    """
    if not converged:
        return INCONCLUSIVE
    if slope + 2 * stderr < BOUNDED_MARGIN:
        return BOUNDED
    if slope - 2 * stderr > 0:
        return BLOW_UP
    return INCONCLUSIVE


@dataclass(frozen=True)
class ScanSpec:
    """One R-scan. ``region`` is "paper" (p or q region by family) or a RegionSpec.

    ``t_samples`` / ``x_samples`` of None take the canonical region defaults.
    """

    family: FamilySpec
    R_list: tuple
    p: float = 2.0
    q: float = 2.0
    alpha: float = 0.0
    s: float = 0.0
    region: object = "paper"
    t_samples: int = None
    x_samples: int = None
    cull_tol: float = DEFAULT_CULL_TOL
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    freq_samples: int = 16

    def __post_init__(self):
        R = tuple(float(r) for r in self.R_list)
        if len(R) < 3:
            raise ContractError("R_list needs at least three scales")
        if any(b <= a for a, b in zip(R, R[1:])):
            raise ContractError("R_list must be strictly increasing")
        object.__setattr__(self, "R_list", R)
        if self.region not in ("paper", "paper-p-region", "paper-q-region") and not isinstance(self.region, RegionSpec):
            raise ContractError(f"unknown region policy {self.region!r}")

    def region_for(self, w):
        if isinstance(self.region, RegionSpec):
            return self.region
        use_q = self.region == "paper-q-region" or (self.region == "paper" and self.family.is_q)
        kw = {}
        if self.t_samples:
            kw["t_samples"] = self.t_samples
        if self.x_samples:
            kw["x_samples"] = self.x_samples
        return paper_q_region(w, **kw) if use_q else paper_p_region(w, **kw)

    @property
    def region_policy(self):
        if isinstance(self.region, RegionSpec):
            return "custom"
        if self.region == "paper":
            return "paper-q-region" if self.family.is_q else "paper-p-region"
        return self.region


@dataclass(frozen=True)
class ScalingRecord:
    R: float
    lhs: float
    rhs: float
    ratio: float
    lhs_converged: bool
    rhs_converged: bool
    term_count: int
    lhs_refined: float = None
    rhs_refined: float = None


@dataclass(frozen=True)
class ScalingReport:
    family: str
    n: int
    m: int
    p: float
    q: float
    alpha: float
    s: float
    region_policy: str
    records: tuple
    fitted_slope: float
    predicted_slope: float
    slope_stderr: float
    verdict: str

    @property
    def converged(self):
        return all(r.lhs_converged and r.rhs_converged for r in self.records)


def _rhs(w, s, quad):
    value = hs_norm(w, s, quad)
    if float(s).is_integer():
        # Gauss-Hermite of order s+1 is exact for the polynomial weight
        return value, True, value
    finer = hs_norm(w, s, replace(quad, nodes=2 * quad.nodes))
    change = abs(finer - value) / finer if finer else 0.0
    return value, change <= CONVERGENCE_TOL, finer


def scan_point(spec, R):
    """Build the family at scale R and evaluate both sides."""
    w = build_family(spec.family.with_R(R))
    region = spec.region_for(w)
    deriv = FracDerivSpec(spec.alpha, freq_samples=spec.freq_samples) if spec.alpha else None
    lhs = mixed_norm(w, MixedNormSpec(spec.p, spec.q, region), deriv, spec.cull_tol)
    rhs, rhs_ok, rhs_fine = _rhs(w, spec.s, spec.quad)
    return ScalingRecord(
        R, lhs.value, rhs, lhs.value / rhs, lhs.converged, rhs_ok, len(w),
        lhs.refined_value, rhs_fine,
    )


def run_scan(spec, workers=1):
    """Evaluate every scale, fit the slope and attach a verdict.

    Scales may run on a thread pool; records are assembled in R order and
    every per-R computation is independent, so the report does not depend
    on ``workers``.
    """
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda R: scan_point(spec, R), spec.R_list))
    else:
        records = [scan_point(spec, R) for R in spec.R_list]
    fit = fit_slope([r.R for r in records], [r.ratio for r in records])
    converged = all(r.lhs_converged and r.rhs_converged for r in records)
    fam = spec.family
    m = fam.m if fam.is_q else 1
    return ScalingReport(
        fam.family, fam.n, fam.m if fam.is_q else None, spec.p, spec.q, spec.alpha, spec.s,
        spec.region_policy, tuple(records), fit.slope,
        predicted_slope(fam.family, spec.p, spec.q, fam.n, m), fit.stderr,
        classify(fit.slope, fit.stderr, converged),
    )


@dataclass(frozen=True)
class VerdictSummary:
    rows: tuple
    status: str
    conclusion: str

    def table(self):
        head = f"{'family':8} {'n':>2} {'m':>2} {'p':>5} {'q':>5} {'slope':>8} {'pred':>8}  verdict"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            m = "-" if r["m"] is None else str(r["m"])
            lines.append(
                f"{r['family']:8} {r['n']:>2} {m:>2} {_fmt(r['p']):>5} {_fmt(r['q']):>5} "
                f"{r['fitted_slope']:>8.4f} {r['predicted_slope']:>8.4f}  {r['verdict']}"
            )
        lines.append(self.conclusion)
        return "\n".join(lines)


def _fmt(v):
    return "inf" if math.isinf(v) else f"{v:g}"


def _get(r, key):
    return r[key] if isinstance(r, dict) else getattr(r, key)


def verdict_summary(reports):
    """Matrix of verdicts with a suite-level status.

    ``fail`` if any p < 2 or q < 2 row is bounded-consistent or any p = q = 2
    row is blow-up-consistent; ``partial`` if some row is inconclusive;
    ``pass`` otherwise.
    """
    reports = list(reports)
    if not reports:
        raise ContractError("need at least one report")
    rows = []
    for r in reports:
        rows.append({k: _get(r, k) for k in (
            "family", "n", "m", "p", "q", "alpha", "s", "fitted_slope", "predicted_slope", "verdict",
        )})
    rows.sort(key=lambda r: (r["family"], r["n"], r["m"] or 0, r["p"], r["q"], r["alpha"], r["s"]))
    necessity = [r for r in rows if r["p"] < 2 or r["q"] < 2]
    sharp = [r for r in rows if r["p"] == 2 and r["q"] == 2]
    bad = [r for r in necessity if r["verdict"] == BOUNDED] + [r for r in sharp if r["verdict"] == BLOW_UP]
    if bad:
        status = "fail"
        conclusion = f"FAIL: {len(bad)} row(s) contradict the necessity of p >= 2 and q >= 2"
    elif any(r["verdict"] == INCONCLUSIVE for r in rows):
        status = "partial"
        n_inc = sum(r["verdict"] == INCONCLUSIVE for r in rows)
        conclusion = f"PARTIAL: {n_inc} inconclusive row(s); no contradiction found"
    else:
        status = "pass"
        conclusion = (
            f"PASS: all {len(necessity)} row(s) with p < 2 or q < 2 are blow-up-consistent; "
            "p = q = 2 rows stay bounded"
        )
    return VerdictSummary(tuple(rows), status, conclusion)
