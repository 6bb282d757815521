"""Command line entry point: ``hymflow <command> ...``.

Exit codes: 0 when every enabled check passes, 1 when a check fails (the
failing statement is named on stderr), 2 for usage errors or missing input.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import diagnostics as dg
from . import donaldson as dn
from . import g2, io, monad
from ._memory import keep_freed_memory
from . import lattice as lat
from .flow import FlowTrace, HYMFlow, monitor_max_principles


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _jsonable(obj):
    """Non-finite floats become null so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fail(lemma: str, detail: str = "") -> int:
    print(f"FAIL: {lemma}" + (f" ({detail})" if detail else ""), file=sys.stderr)
    return 1


# -- algebra ----------------------------------------------------------------------------


def cmd_algebra(args) -> int:
    rows = g2.identity_table()
    width = max(len(r["identity"]) for r in rows)
    for r in rows:
        status = "ok" if r["ok"] else "FAIL"
        if not r["required"]:
            status = f"info: {'holds' if r['ok'] else r['detail']}"
        print(f"{r['identity']:<{width}}  {status}")
    failed = [r["identity"] for r in rows if r["required"] and not r["ok"]]
    if failed:
        return _fail(failed[0])
    return 0


# -- flow -----------------------------------------------------------------------------------


def _build(cfg: io.RunConfig):
    chart = cfg.chart()
    twist = lat.make_twist(
        chart, rank=cfg.rank, amp=cfg.amp, decay=cfg.decay, width=cfg.width, seed=cfg.seed, det_one=cfg.det_one
    )
    return chart, twist


def cmd_flow_run(args) -> int:
    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        cfg = io.load_config(path)
    except ValueError as exc:
        raise UsageError(f"bad config {path}: {exc}") from exc
    started = datetime.now(timezone.utc)
    out = Path(args.out)
    (out / "fields").mkdir(parents=True, exist_ok=True)
    chart, twist = _build(cfg)
    cf = cfg.flow_config()
    est = HYMFlow(
        dt=cf.dt,
        T_end=cf.T_end,
        safety=cf.safety,
        det_one=cf.det_one,
        cadence=cf.cadence,
        target=cf.target,
        max_steps=cf.max_steps,
        energy=cf.energy,
        snapshot_every=cf.snapshot_every,
    ).fit(twist)
    trace = est.trace_
    (out / "config.cfg").write_text(cfg.canonical())
    io.write_trace(out / "trace.csv", trace)
    H0 = trace.snapshots[0][1]
    io.save_field(out / "fields" / "H0.bin", H0, chart, t=0.0)
    for k, (t, H) in enumerate(trace.snapshots):
        io.save_field(out / "fields" / f"snap_{k:04d}.bin", H, chart, t=float(t))
    io.save_field(out / "fields" / "final.bin", est.metric_, chart, t=float(est.state_.t))

    mon = monitor_max_principles(trace, c_dt=cfg.monitor_c_dt)
    checks = {
        "maximum principle for e_hat": bool(mon["e_hat_ok"]),
        "maximum principle for sigma": bool(mon["sigma_ok"]),
    }
    if cfg.energy:
        checks["uniform energy bound"] = bool(dg.energy_e(trace)["bound_ok"])
    io.write_manifest(
        out,
        cfg.hash(),
        checks,
        __version__,
        started,
        extra={"dt": trace.dt, "n": trace.n, "steps": trace.steps, "converged": trace.converged, "energy0": trace.energy0},
    )
    print(json.dumps({"steps": trace.steps, "t": trace.t[-1], "sup_e_hat": trace.sup_e[-1], "checks": checks}))
    for name, ok in checks.items():
        if not ok:
            return _fail(name)
    return 0


# -- diagnostics ------------------------------------------------------------------------------


def _load_run(trace_dir):
    d = Path(trace_dir)
    for name in ("trace.csv", "config.cfg", "manifest.json"):
        if not (d / name).is_file():
            raise UsageError(f"{d} is not a flow-run output directory (missing {name})")
    cfg = io.load_config(d / "config.cfg")
    manifest = json.loads((d / "manifest.json").read_text())
    cols = io.read_trace(d / "trace.csv")
    return d, cfg, manifest, cols


def _snapshots(d: Path):
    snaps = []
    for f in sorted((d / "fields").glob("snap_*.bin")):
        H, side = io.load_field(f)
        snaps.append((side["t"], H))
    return snaps


def cmd_n_functional(args) -> int:
    d, cfg, manifest, cols = _load_run(args.trace)
    trace = FlowTrace(t=list(cols["t"]), N=list(cols["N"]), fhat_l2=list(cols["fhat_l2_sq"]), n=manifest["n"])
    # samples are cadence steps apart, so the lag allowance uses the sample spacing
    trace.dt = manifest["dt"] * cfg.cadence
    res = dn.flow_identity_check(trace, C=args.c_dt)
    rows = zip(res["t"], np.interp(res["t"], cols["t"], cols["N"]), res["dN_dt"], res["rhs"])
    io.write_rows(d / "n_functional.csv", ["t", "N", "dN_dt", "minus_cn_fhat_l2_sq"], rows)
    print((d / "n_functional.csv").read_text(), end="")
    if not res["ok"]:
        return _fail("Donaldson flow identity", f"first violation at t={res['violations'][0]:.4g}")
    return 0


def cmd_claim(args) -> int:
    d, cfg, manifest, cols = _load_run(args.trace)
    chart = cfg.chart()
    H0, _ = io.load_field(d / "fields" / "H0.bin")
    trace = FlowTrace(t=list(cols["t"]), sup_e=list(cols["sup_e_hat"]), snapshots=_snapshots(d), n=manifest["n"])
    rep = dg.claim_lower_bound(trace, chart, H0, eps=args.eps)
    body = json.dumps(_jsonable(rep.as_dict()), indent=2, allow_nan=False)
    (d / "claim.json").write_text(body + "\n")
    print(body)
    if rep.parabola_violations:
        return _fail("parabola lemma", f"{rep.parabola_violations} violations")
    return 0


def cmd_energy(args) -> int:
    d, cfg, manifest, cols = _load_run(args.trace)
    chart = cfg.chart()
    rows = []
    ym0 = None
    worst_hr = 0.0
    bound_ok = True
    for t, H in _snapshots(d):
        e = dg.lattice_energy(H, chart)
        ym0 = e["ym"] if ym0 is None else ym0
        E = e["ym"] - ym0
        bound_ok &= E <= 1e-6 * ym0
        worst_hr = max(worst_hr, e["hodge_riemann_residual"])
        rows.append([t, e["kappa"], e["ym"], e["fhat_l2_sq"], E, e["hodge_riemann_residual"]])
    header = ["t", "kappa", "ym", "fhat_l2_sq", "E", "hodge_riemann_residual"]
    io.write_rows(d / "energy.csv", header, rows)
    print((d / "energy.csv").read_text(), end="")
    if worst_hr > 1e-8:
        return _fail("Hodge-Riemann identity", f"residual {worst_hr:.2e}")
    if not bound_ok:
        return _fail("uniform energy bound")
    return 0


# -- monad ---------------------------------------------------------------------------------------


def cmd_monad(args) -> int:
    if args.c < 1:
        raise UsageError("--c must be >= 1")
    rank, chern = monad.chern_of_monad(args.c, args.dim)
    m = monad.sample_monad(args.c, seed=args.seed)
    rep = monad.exactness_report(m, points=args.points, seed=args.seed)
    print(
        json.dumps(
            {
                "c": args.c,
                "seed": args.seed,
                "rank": rank,
                "chern": list(chern.coeffs),
                "chern_str": str(chern),
                "beta_alpha_zero": rep["beta_alpha_zero"],
                "exactness": {"points": rep["points"], "failures": rep["failures"]},
            },
            indent=2,
        )
    )
    if not rep["beta_alpha_zero"]:
        return _fail("monad complex condition beta alpha = 0")
    if not rep["ok"]:
        return _fail("fiberwise exactness of the monad")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hymflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("algebra-selftest", help="exact G2 identity table")
    a.set_defaults(func=cmd_algebra)

    f = sub.add_parser("flow-run", help="run the flow from a config file")
    f.add_argument("--config", required=True)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_flow_run)

    d = sub.add_parser("diagnostics", help="post-process a flow-run directory")
    dsub = d.add_subparsers(dest="which", required=True, parser_class=_Parser)
    n = dsub.add_parser("n-functional")
    n.add_argument("--trace", required=True)
    n.add_argument("--c-dt", type=float, default=dn.FLOW_IDENTITY_C)
    n.set_defaults(func=cmd_n_functional)
    c = dsub.add_parser("claim")
    c.add_argument("--trace", required=True)
    c.add_argument("--eps", type=float, default=0.5)
    c.set_defaults(func=cmd_claim)
    e = dsub.add_parser("energy")
    e.add_argument("--trace", required=True)
    e.set_defaults(func=cmd_energy)

    m = sub.add_parser("monad", help="Chern classes and a sampled instanton monad")
    m.add_argument("--c", type=int, required=True)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--dim", type=int, default=3, choices=(2, 3))
    m.add_argument("--points", type=int, default=100)
    m.set_defaults(func=cmd_monad)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    keep_freed_memory()
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hymflow: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
