"""Command-line front end: ``collapsing {build,check,scan,report-merge}``.

Exit status: 0 when nothing failed and no job marked ``required`` ended
inconclusive; 1 on check failures, contradicting verdicts or required
inconclusive scans; 2 on configuration, contract or resource errors.
"""

import argparse
import logging
import os
import sys

from scipy.spatial import cKDTree

from . import reporting
from .checks import FAULTS, run_checks
from .config import DEFAULTS, exponent, load_config
from .exceptions import ConfigurationError, ContractError, ResourceError
from .families import FamilySpec, build_family
from .gaussian import QuadratureSpec, gram_l2_norm, hs_norm
from .norms import RegionSpec
from .scaling import INCONCLUSIVE, ScanSpec, run_scan, verdict_summary

log = logging.getLogger("collapsing")

_FAMILY_KEYS = ("family", "n", "R", "C", "m", "direction", "coordinate_floor", "seed")


def family_spec(job, defaults, seed=None):
    kw = {k: job.family[k] for k in _FAMILY_KEYS if job.family.get(k) is not None}
    kw.setdefault("C", defaults["C"])
    kw.setdefault("seed", defaults["seed"])
    if seed is not None:
        kw["seed"] = seed
    if kw.get("direction") is not None:
        kw["direction"] = tuple(kw["direction"])
    return FamilySpec(cap=defaults["cap"], **kw)


def scan_spec(job, defaults, seed=None):
    raw = job.scan
    region = raw.get("region", "paper")
    if isinstance(region, dict):
        region = RegionSpec(
            tuple(region["time_interval"]), tuple(tuple(b) for b in region["space_box"]),
            **{k: region[k] for k in ("t_samples", "x_samples", "t_rule", "x_rule") if k in region},
        )
    return ScanSpec(
        family_spec(job, defaults, seed),
        tuple(raw["R_list"]),
        p=exponent(raw.get("p", 2)),
        q=exponent(raw.get("q", 2)),
        alpha=float(raw.get("alpha", 0)),
        s=float(raw.get("s", 0)),
        region=region,
        t_samples=defaults["t_samples"],
        x_samples=defaults["x_samples"],
        cull_tol=defaults["cull_tol"],
        quad=QuadratureSpec(defaults["nodes"], defaults["padding"]),
        freq_samples=defaults["freq_samples"],
    )


def _min_spacing(points):
    if len(points) < 2:
        return None
    dist, _ = cKDTree(points).query(points, k=2)
    return float(dist[:, 1].min())


def build_record(job, defaults, seed=None):
    """Family summary dict; equal inputs give equal (byte-identical) output."""
    spec = family_spec(job, defaults, seed)
    w = build_family(spec)
    quad = QuadratureSpec(defaults["nodes"], defaults["padding"])
    l2 = gram_l2_norm(w)
    hs = []
    for s in defaults["hs_s"]:
        v = hs_norm(w, s, quad)
        hs.append({"s": float(s), "value": v, "log10_value": reporting.log10(v)})
    rec = {
        "schema_version": reporting.SCHEMA_VERSION,
        "kind": "build",
        "job": job.name,
        "family": spec.family,
        "n": spec.n,
        "R": spec.R,
        "C": w.meta["C"],
        "m": spec.m if spec.is_q else None,
        "seed": spec.seed,
        "term_count": len(w),
        "min_spacing": _min_spacing(w.centers),
        "l2_norm": l2,
        "log10_l2_norm": reporting.log10(l2),
        "hs_norms": hs,
    }
    return rec, w


def _selected(cfg, kind, name):
    if name is not None:
        job = cfg.job(name)
        if job.kind != kind:
            raise ConfigurationError(f"job {name!r} is a {job.kind} job, not {kind}")
        return [job]
    return [j for j in cfg.jobs if j.kind == kind]


def _out_dir(args, cfg):
    return args.out or cfg.defaults["out"]


def cmd_build(args):
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    jobs = _selected(cfg, "build", args.job)
    if not jobs:
        log.warning("no build jobs selected")
    for job in jobs:
        rec, w = build_record(job, cfg.defaults, args.seed)
        reporting.write_json(os.path.join(out, f"{job.name}.build.json"), rec)
        if job.write_terms:
            reporting.atomic_write(os.path.join(out, f"{job.name}.terms.csv"), reporting.terms_csv(w))
        print(f"{job.name}: {rec['family']} n={rec['n']} R={rec['R']:g} terms={rec['term_count']} "
              f"l2={rec['l2_norm']:.6g}")
    return 0


def cmd_check(args):
    if args.config:
        cfg = load_config(args.config)
        fixtures, seed, out = cfg.fixtures, cfg.check_seed, _out_dir(args, cfg)
    else:
        fixtures, seed, out = None, 0, args.out or DEFAULTS["out"]
    if args.seed is not None:
        seed = args.seed
    report = run_checks(fixtures, args.inject_fault, seed)
    reporting.write_json(os.path.join(out, "check_report.json"), report)
    for w in report["warnings"]:
        log.warning(w)
    for c in report["checks"]:
        status = "ok  " if c["passed"] else "FAIL"
        line = f"{status} {c['name']:18} residual={c['residual']:.3e} tol={c['tol']:.0e}"
        if not c["passed"]:
            line += f" expected={c['expected']} actual={c['actual']}"
        print(line)
    print(f"{len(report['checks'])} checks, {report['failures']} failures")
    return 1 if report["failures"] else 0


def _exit_for(docs):
    summary = verdict_summary(docs)
    required_inc = sorted(d["job"] for d in docs if d["required"] and d["verdict"] == INCONCLUSIVE)
    code = 1 if summary.status == "fail" or required_inc else 0
    return summary, required_inc, code


def cmd_scan(args):
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    jobs = _selected(cfg, "scan", args.job)
    if not jobs:
        log.warning("no scan jobs selected")
        return 0
    docs = []
    for job in jobs:
        report = run_scan(scan_spec(job, cfg.defaults, args.seed), workers=args.threads)
        doc = reporting.scan_document(report, job.name, job.required)
        base = os.path.join(out, job.name)
        reporting.write_json(base + ".scan.json", doc)
        reporting.atomic_write(base + ".scan.csv", reporting.scan_csv(report))
        reporting.atomic_write(base + ".plot.dat", reporting.plot_data(report))
        print(f"{job.name}: slope={report.fitted_slope:.4f} +- {report.slope_stderr:.4f} "
              f"(predicted {report.predicted_slope:.4f}) -> {report.verdict}")
        docs.append(_summary_row(doc))
    summary, required_inc, code = _exit_for(docs)
    for name in required_inc:
        log.error("required job %s is inconclusive", name)
    print(summary.conclusion)
    return code


def _summary_row(doc):
    row = {k: doc[k] for k in ("family", "n", "m", "alpha", "s", "fitted_slope",
                               "predicted_slope", "verdict", "job", "required")}
    row["p"] = reporting.from_jsonable(doc["p"])
    row["q"] = reporting.from_jsonable(doc["q"])
    return row


def cmd_report_merge(args):
    paths = []
    for p in args.reports:
        if os.path.isdir(p):
            paths.extend(sorted(os.path.join(p, f) for f in os.listdir(p) if f.endswith(".scan.json")))
        else:
            paths.append(p)
    if not paths:
        raise ConfigurationError("no scan reports to merge")
    docs = [_summary_row(reporting.read_json(p)) for p in paths]
    summary, required_inc, code = _exit_for(docs)
    rows = []
    for r in summary.rows:
        rows.append({k: (reporting._jsonable(v) if isinstance(v, float) else v) for k, v in r.items()})
    merged = {
        "schema_version": reporting.SCHEMA_VERSION,
        "kind": "summary",
        "status": summary.status,
        "conclusion": summary.conclusion,
        "required_inconclusive": required_inc,
        "rows": rows,
    }
    out = args.out or "."
    reporting.write_json(os.path.join(out, "summary.json"), merged)
    print(summary.table())
    return code


def make_parser():
    parser = argparse.ArgumentParser(prog="collapsing", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, metavar="PATH")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--seed", type=int, help="override every family seed")
        p.add_argument("--threads", type=int, default=1, metavar="N")

    p = sub.add_parser("build", help="build families and write summary records")
    common(p)
    p.add_argument("--job", metavar="NAME")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("check", help="run oracle-equivalence and invariant checks")
    common(p, config_required=False)
    p.add_argument("--inject-fault", choices=FAULTS, help="test mode: corrupt the closed form")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("scan", help="run R-scans and write CSV/JSON/plot data")
    common(p)
    p.add_argument("--job", metavar="NAME")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("report-merge", help="merge scan reports into a verdict summary")
    p.add_argument("reports", nargs="+", metavar="PATH", help="scan JSON files or directories")
    p.add_argument("--out", metavar="DIR")
    p.set_defaults(func=cmd_report_merge)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, ContractError, ResourceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
