"""Named self-checks comparing closed forms against independent references.

Each fixture returns one or more :class:`CheckResult` rows holding the two
values that were compared and the residual between them. ``fault`` injects a
known defect (``"branch-sign"``: the evolution prefactor root taken on the
wrong side of its branch cut) to show the oracle fixtures catch it. Under
that fault the two prefactors of a (+, -) signature swap, so their product
and the Gamma fixture are unchanged; the Lambda and G fixtures fail.
"""

from dataclasses import dataclass
import math

import numpy as np

from .exceptions import ContractError
from .families import FamilySpec, build_family
from .gaussian import (
    BlockSignature, GaussianTerm, WavepacketSum, _evolved_log, evolve_sum, evolve_terms,
    gram_l2_norm, hermitian_symmetrize, hs_norm, inner_product,
)
from .norms import eval_diagonal
from .oracle import GridSpec, check_decay, grid_l2_norm, quad_inner_product, sample_term, spectral_evolve
from .scaling import fit_slope

FAULTS = ("branch-sign",)


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tol: float
    expected: object
    actual: object

    @property
    def passed(self):
        return bool(self.residual <= self.tol)

    def to_dict(self):
        return {
            "name": self.name, "residual": float(self.residual), "tol": self.tol,
            "passed": self.passed, "expected": _plain(self.expected), "actual": _plain(self.actual),
        }


def _plain(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def _random_term(rng, sig, width, spread=3.0, mod=0.5):
    d = sig.dim
    amp = complex(rng.normal(), rng.normal())
    return GaussianTerm(amp, rng.uniform(-spread, spread, d), rng.uniform(-mod, mod, d), width)


def _oracle_fixture(sig, N, fault, seed):
    rng = np.random.default_rng(seed)
    width = 4.0 * 8.0
    grid = GridSpec(48.0, N, sig.dim)
    term = _random_term(rng, sig, width)
    w = WavepacketSum.from_terms(sig, [term])
    pts = grid.points().reshape(-1, sig.dim)
    init = sample_term(term, grid)
    worst, pair = 0.0, (0j, 0j)
    for t in (1.0, 4.0, 8.0):
        ref = spectral_evolve(init, sig, t, grid, term).reshape(-1)
        if fault == "branch-sign":
            got = term.amplitude * np.exp(_evolved_log(
                w.centers, w.modulations, width, sig, t, pts, branch_sign=-1)[0])
        else:
            got = evolve_terms(w, t, pts)[0]
        err = _rel(got, ref)
        if err >= worst:
            k = int(np.argmax(np.abs(ref)))
            worst, pair = err, (complex(ref[k]), complex(got[k]))
    return worst, pair


def check_oracle(name, sig, N, fault=None, seed=0):
    res, (ref, got) = _oracle_fixture(sig, N, fault, seed)
    return [CheckResult(name, res, 1e-6, ref, got)]


def check_inner_product(seed=0, pairs=20):
    rng = np.random.default_rng(seed)
    out = []
    worst, pair = 0.0, (0j, 0j)
    for i in range(pairs):
        d = 1 + i % 3
        sig = BlockSignature(((d, 1),))
        width = float(rng.uniform(1.0, 4.0))
        a = _random_term(rng, sig, width, spread=2.0, mod=1.0)
        b = _random_term(rng, sig, width, spread=2.0, mod=1.0)
        grid = GridSpec(32.0, 256 if d < 3 else 128, d)
        ref = quad_inner_product(a, b, grid)
        got = inner_product(a, b)
        err = abs(got - ref) / abs(ref)
        if err >= worst:
            worst, pair = err, (ref, got)
    out.append(CheckResult("inner-product", worst, 1e-8, *pair))
    return out


def check_t0_identity(seed=0):
    rng = np.random.default_rng(seed)
    sig = BlockSignature.gamma(1)
    w = WavepacketSum.from_terms(sig, [_random_term(rng, sig, 16.0) for _ in range(4)])
    x = rng.uniform(-5, 5, (50, sig.dim))
    ref = w(x)
    got = evolve_sum(w, 0.0, x)
    return [CheckResult("t0-identity", _rel(got, ref), 1e-12, complex(ref[0]), complex(got[0]))]


def check_unitarity(seed=0):
    rng = np.random.default_rng(seed)
    sig = BlockSignature.lambda_(1)
    w = WavepacketSum.from_terms(sig, [_random_term(rng, sig, 8.0) for _ in range(3)])
    grid = GridSpec(40.0, 256, 2)
    ref = gram_l2_norm(w)
    worst, got = 0.0, ref
    for t in (2.0, 6.0):
        val = grid_l2_norm(evolve_sum(w, t, grid.points()), grid)
        if abs(val - ref) / ref >= worst:
            worst, got = abs(val - ref) / ref, val
    return [CheckResult("unitarity", worst, 1e-6, ref, got)]


def check_hermitian_gamma(seed=0):
    w = hermitian_symmetrize(build_family(FamilySpec("GammaP", 1, R=64, seed=seed)))
    R = w.meta["R"]
    worst, val = 0.0, 0j
    for t in np.linspace(0.0, R, 9):
        for x in np.linspace(-2.0, 2.0, 5):
            v = eval_diagonal(w, t, [x], cull_tol=None)
            ratio = abs(v.imag) / max(abs(v), 1e-300)
            if ratio >= worst:
                worst, val = ratio, v
    return [CheckResult("hermitian-gamma", worst, 1e-10, val.real, val)]


def check_plancherel(seed=0):
    # frequency-side H^0 norm against a physical-space grid sum
    w = build_family(FamilySpec("LambdaP", 1, R=64, seed=seed))
    grid = GridSpec(160.0, 512, 2)
    samples = w(grid.points())
    check_decay(samples)
    ref = grid_l2_norm(samples, grid)
    got = hs_norm(w, 0)
    return [CheckResult("plancherel", abs(got - ref) / ref, 1e-6, ref, got)]


def check_culling(seed=0):
    # a wide lattice family, so most terms are culled at any given x
    w = build_family(FamilySpec("LambdaQ", 1, R=16, m=2, seed=seed))
    rng = np.random.default_rng(seed)
    rad = w.meta["R"] ** 2
    worst, pair = 0.0, (0j, 0j)
    for t in (0.0, 0.5, 1.0):
        for x in rng.uniform(-rad, rad, 4):
            full = eval_diagonal(w, t, [x], cull_tol=None)
            culled = eval_diagonal(w, t, [x])
            err = abs(culled - full) / abs(full)
            if err >= worst:
                worst, pair = err, (full, culled)
    return [CheckResult("culling", worst, 1e-8, *pair)]


def check_slope_fit(seed=0):
    rng = np.random.default_rng(seed)
    sigma = float(rng.uniform(-1, 1))
    c = float(rng.uniform(0.1, 10))
    R = 2.0 ** np.arange(4, 11)
    fit = fit_slope(R, c * R ** sigma)
    return [CheckResult("slope-fit", abs(fit.slope - sigma), 1e-10, sigma, fit.slope)]


def check_determinism(seed=0):
    out = []
    for fam, R in (("LambdaP", 256), ("GP", 64), ("LambdaQ", 16)):
        spec = FamilySpec(fam, 1, R=R, m=2 if fam.endswith("Q") else None, seed=seed)
        a, b = build_family(spec), build_family(spec)
        same = (a.centers.tobytes() == b.centers.tobytes()
                and a.modulations.tobytes() == b.modulations.tobytes()
                and a.amplitudes.tobytes() == b.amplitudes.tobytes())
        out.append(CheckResult(f"determinism-{fam}", 0.0 if same else 1.0, 0.0, len(a), len(b)))
    return out


FIXTURES = {
    "oracle-lambda": lambda fault, seed: check_oracle("oracle-lambda", BlockSignature.lambda_(1), 256, fault, seed),
    "oracle-gamma": lambda fault, seed: check_oracle("oracle-gamma", BlockSignature.gamma(1), 256, fault, seed),
    "oracle-g": lambda fault, seed: check_oracle("oracle-g", BlockSignature.g(1), 128, fault, seed),
    "inner-product": lambda fault, seed: check_inner_product(seed),
    "t0-identity": lambda fault, seed: check_t0_identity(seed),
    "unitarity": lambda fault, seed: check_unitarity(seed),
    "hermitian-gamma": lambda fault, seed: check_hermitian_gamma(seed),
    "plancherel": lambda fault, seed: check_plancherel(seed),
    "culling": lambda fault, seed: check_culling(seed),
    "slope-fit": lambda fault, seed: check_slope_fit(seed),
    "determinism": lambda fault, seed: check_determinism(seed),
}


def run_checks(fixtures=None, fault=None, seed=0):
    """Run the named fixtures (all when None) and return a report dict."""
    if fault is not None and fault not in FAULTS:
        raise ContractError(f"unknown fault {fault!r}; known: {FAULTS}")
    names = list(FIXTURES) if fixtures is None else list(fixtures)
    unknown = [n for n in names if n not in FIXTURES]
    if unknown:
        raise ContractError(f"unknown fixtures {unknown}; known: {list(FIXTURES)}")
    results = []
    for name in names:
        results.extend(FIXTURES[name](fault, seed))
    warnings = [] if results else ["0 checks: fixture list is empty"]
    return {
        "schema_version": 1,
        "kind": "check",
        "fault": fault,
        "checks": [r.to_dict() for r in results],
        "failures": sum(not r.passed for r in results),
        "warnings": warnings,
    }
