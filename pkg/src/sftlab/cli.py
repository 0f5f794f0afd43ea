"""Command-line front door.

Every run produces a manifest (command, full parameter set, seeds,
budgets, artifact version) so outputs are reproducible byte for byte:
identical manifests give identical output bytes.  Timing is recorded
only in sidecar manifests, never inside an output stream.

Exit codes: 0 success, 1 failed checks, 2 input/precondition errors,
3 budget exhaustion, 64 usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chaos import Thresholds, classify_pair
from .checks import run_checks
from .entropy_est import g_omega_counts, ml_set_slope_scan
from .errors import BudgetError, SftlabError
from .measures import MarkovMeasure
from .moran import FrequencyLibrary, assemble_moran, build_schedule, ml_witness
from .points import MarkovPoint, parse_point
from .potentials import load_potential
from .pressure import SearchControl, SpectrumCurve, legendre_spectrum
from .sft import DEFAULT_WORD_BUDGET, Sft
from .transfer import (
    check_bilipschitz,
    check_equivariance,
    check_involution,
    phi_full,
)

try:
    from importlib.metadata import version as _pkg_version

    VERSION = _pkg_version("sftlab")
except Exception:  # pragma: no cover - metadata missing in odd installs
    VERSION = "0.0.0"


def _fmt(x) -> str:
    """Locale-independent, 9 significant digits, period decimal."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    v = float(x)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.9g}"


@dataclass
class RunManifest:
    command: str
    params: dict
    seed: Optional[int]
    budget: Optional[int]
    version: str
    wall_time_s: Optional[float] = field(default=None)

    def as_dict(self, include_timing: bool = True) -> dict:
        d = {
            "command": self.command,
            "params": self.params,
            "seed": self.seed,
            "budget": self.budget,
            "version": self.version,
        }
        if include_timing and self.wall_time_s is not None:
            d["wall_time_s"] = round(self.wall_time_s, 3)
        return d

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.as_dict(include_timing), sort_keys=True)


def _manifest(args, command: str) -> RunManifest:
    skip = {"func", "out"}
    params = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        params[k] = v if isinstance(v, (int, float, str, bool, type(None))) else str(v)
    return RunManifest(
        command=command,
        params=params,
        seed=getattr(args, "seed", None),
        budget=getattr(args, "budget", None),
        version=VERSION,
    )


def _deliver(args, body: str, manifest: RunManifest, t0: float) -> int:
    manifest.wall_time_s = time.perf_counter() - t0
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(body)
        with open(args.out + ".manifest.json", "w") as fh:
            fh.write(manifest.to_json(include_timing=True) + "\n")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(body)
        sys.stdout.write("# manifest " + manifest.to_json(include_timing=False) + "\n")
    return 0


# -- plot data ---------------------------------------------------------


def emit_plotdata(obj) -> str:
    """CSV for the plottable result objects: stable column order,
    period decimals, 9 significant digits."""
    if isinstance(obj, SpectrumCurve):
        lines = ["alpha,p_star,value,lower,upper,iterations"]
        for i in range(len(obj.alphas)):
            a = obj.alphas[i]
            astr = _fmt(a if np.ndim(a) == 0 else a[0])
            p = obj.p_stars[i]
            pstr = _fmt(p if np.ndim(p) == 0 else p[0])
            lines.append(
                ",".join(
                    [
                        astr,
                        pstr,
                        _fmt(obj.values[i]),
                        _fmt(obj.lowers[i]),
                        _fmt(obj.uppers[i]),
                        str(int(obj.iterations[i])),
                    ]
                )
            )
        return "\n".join(lines) + "\n"
    if hasattr(obj, "prop_lo") and hasattr(obj, "eps"):
        # distributional profile, long format; the proportion column is
        # the conclusive below-eps share (interval lower reading)
        lines = ["eps,n,proportion"]
        for i, e in enumerate(obj.eps):
            for j, n in enumerate(obj.ns):
                lines.append(f"{_fmt(e)},{int(n)},{_fmt(obj.prop_lo[i, j])}")
        return "\n".join(lines) + "\n"
    if isinstance(obj, tuple) and len(obj) == 3:
        bps, logs, slopes = obj
        lines = ["breakpoint,count_log,slope"]
        for b, lg, sl in zip(bps, logs, slopes):
            lines.append(f"{int(b)},{_fmt(lg)},{_fmt(sl)}")
        return "\n".join(lines) + "\n"
    raise SftlabError(f"no plot-data format for {type(obj).__name__}")


# -- subcommands -------------------------------------------------------


def _cmd_classify(args) -> int:
    t0 = time.perf_counter()
    sft = Sft.from_file(args.matrix)
    c = sft.classify()
    p = str(c.period) if c.period is not None else "na"
    r = str(c.primitivity_r) if c.primitivity_r is not None else "na"
    body = (
        f"irreducible={str(c.irreducible).lower()} "
        f"aperiodic={str(c.aperiodic).lower()} p={p} r={r}\n"
    )
    return _deliver(args, body, _manifest(args, "classify"), t0)


def _cmd_entropy(args) -> int:
    t0 = time.perf_counter()
    sft = Sft.from_file(args.matrix)
    h = sft.topological_entropy()
    body = (
        f"entropy_nats={_fmt(h)}\n"
        f"dimension={_fmt(h / math.log(sft.K))}\n"
    )
    return _deliver(args, body, _manifest(args, "entropy"), t0)


def _cmd_words(args) -> int:
    t0 = time.perf_counter()
    sft = Sft.from_file(args.matrix)
    lines = ["depth,count,log_count,slope"]
    for n in range(1, args.max_n + 1):
        c = sft.count_words(n)
        lg = sft.log_count_words(n)
        lines.append(f"{n},{c},{_fmt(lg)},{_fmt(lg / n)}")
    return _deliver(args, "\n".join(lines) + "\n", _manifest(args, "words"), t0)


def _parse_alphas(spec: str) -> np.ndarray:
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise SftlabError("alpha range must be lo:hi:count")
        lo, hi, m = float(parts[0]), float(parts[1]), int(parts[2])
        return np.linspace(lo, hi, m)
    return np.array([float(tok) for tok in spec.split(",") if tok])


def _load_measure(spec: Optional[str], sft: Sft) -> Optional[MarkovMeasure]:
    if spec in (None, "parry"):
        return MarkovMeasure.parry(sft)
    if spec == "uniform":
        return MarkovMeasure.uniform(sft.K)
    if spec == "none":
        return None
    return MarkovMeasure.from_file(spec, sft=sft)


def _cmd_spectrum(args) -> int:
    t0 = time.perf_counter()
    sft = Sft.from_file(args.matrix)
    f = load_potential(args.potential, K=sft.K)
    nu = _load_measure(args.measure, sft)
    control = SearchControl(
        n=args.n,
        num_samples=args.samples,
        seed=args.seed,
        eta=args.eta,
        p_tol=args.p_tol,
        budget=args.budget,
    )
    curve = legendre_spectrum(sft, f, nu, _parse_alphas(args.alphas), control)
    return _deliver(args, emit_plotdata(curve), _manifest(args, "spectrum"), t0)


def _cmd_gcount(args) -> int:
    t0 = time.perf_counter()
    sft = Sft.from_file(args.matrix)
    f = load_potential(args.potential, K=sft.K)
    omega = parse_point(args.omega, K=sft.K) if args.omega else None
    targets = [
        [float(tok) for tok in grp.split(",") if tok]
        for grp in args.targets.split(";")
        if grp
    ]
    depths = [int(tok) for tok in args.depths.split(",") if tok]
    table = g_omega_counts(
        sft, f, omega, targets, args.delta, depths, budget=args.budget
    )
    lines = ["depth,count,log_count,slope"]
    for n, c, s in zip(table.depths, table.counts, table.slopes):
        lg = math.log(c) if c > 0 else -math.inf
        lines.append(f"{n},{c},{_fmt(lg)},{_fmt(s)}")
    return _deliver(args, "\n".join(lines) + "\n", _manifest(args, "gcount"), t0)


def _cmd_chaos_pair(args) -> int:
    t0 = time.perf_counter()
    x = parse_point(args.x, K=args.K)
    y = parse_point(args.y, K=args.K)
    th = Thresholds(close=args.close, apart=args.apart)
    v = classify_pair(x, y, horizon=args.horizon, thresholds=th)
    lines = []
    for flag, verdict in v.flags.items():
        lines.append(f"{flag}={verdict}")
    for name, iv in v.margins.items():
        lines.append(f"margin_{name}=[{_fmt(iv.lo)},{_fmt(iv.hi)}]")
    body = "\n".join(lines) + "\n"
    if args.out:
        # profile CSV goes to the file; the verdict stays on stdout
        manifest = _manifest(args, "chaos-pair")
        manifest.wall_time_s = time.perf_counter() - t0
        with open(args.out, "w") as fh:
            fh.write(emit_plotdata(v.profile))
        with open(args.out + ".manifest.json", "w") as fh:
            fh.write(manifest.to_json(include_timing=True) + "\n")
        sys.stdout.write(body)
        print(f"wrote {args.out}")
        return 0
    body += emit_plotdata(v.profile)
    return _deliver(args, body, _manifest(args, "chaos-pair"), t0)


def _cmd_transfer(args) -> int:
    t0 = time.perf_counter()
    sft = Sft.from_file(args.matrix)
    rng = np.random.default_rng(args.seed)
    nu = MarkovMeasure.parry(sft)
    lines = []
    if args.kind == "full":
        omega = MarkovPoint(nu, int(rng.integers(1 << 62)))
        omega2 = MarkovPoint(nu, int(rng.integers(1 << 62)))
        samples = [MarkovPoint(nu, int(rng.integers(1 << 62))) for _ in range(args.samples)]
        rep = check_involution(omega, omega2, samples, args.depth, sft=sft)
        lines.append(
            f"involution ok={str(rep.ok).lower()} samples={rep.num_samples} "
            f"depth={rep.depth} mismatch_sets_equal={str(rep.mismatch_sets_equal).lower()}"
        )
        y = phi_full(omega, omega2, samples[0], sft)
        lines.append(f"first_image_prefix={''.join(map(str, y.prefix(16)))}")
    else:
        rep = check_bilipschitz(
            sft,
            args.kind,
            args.M,
            num_samples=args.samples,
            depth=args.depth,
            seed=args.seed,
        )
        lines.append(
            f"bilipschitz kind={rep.kind} M={rep.M} r={rep.r} checked={rep.checked} "
            f"vacuous={rep.vacuous} violations={rep.violations} "
            f"worst_lower_slack={rep.worst_lower_slack} "
            f"worst_upper_slack={rep.worst_upper_slack} ok={str(rep.ok).lower()}"
        )
        if args.kind == "sft":
            omega = MarkovPoint(nu, int(rng.integers(1 << 62)))
            omega2 = MarkovPoint(nu, int(rng.integers(1 << 62)))
            x = MarkovPoint(nu, int(rng.integers(1 << 62)))
            eq = check_equivariance(sft, omega, omega2, x, args.M, args.depth)
            lines.append(
                f"equivariance ok={str(eq.ok).lower()} checked_len={eq.checked_len}"
            )
    ok = all(" ok=true" in ln or " ok=" not in ln for ln in lines)
    body = "\n".join(lines) + "\n"
    code = _deliver(args, body, _manifest(args, "transfer"), t0)
    return code if ok else 1


def _eps_chain(stages: int, tol: float) -> list:
    return [tol * 0.5**i for i in range(stages)]


def _cmd_moran_build(args) -> int:
    t0 = time.perf_counter()
    sft = Sft.from_file(args.matrix)
    eps = _eps_chain(args.stages, args.tol)
    ratios = (
        [float(tok) for tok in args.ratios.split(",") if tok] if args.ratios else None
    )
    sched = build_schedule(args.t1, eps, ratios=ratios, cap=args.cap)
    libs = [
        FrequencyLibrary(sft, args.symbol, args.target, e) for e in eps
    ]
    ms = assemble_moran(sft, sched, libs, gaps=args.gaps)
    bps = [t for t in sched.breakpoints if t > 0]
    logs = [ms.log_count_at(t) for t in bps]
    slopes = [lg / t for lg, t in zip(logs, bps)]
    manifest = _manifest(args, "moran build")
    if args.out and args.out.endswith(".json"):
        doc = {
            "milestones": sched.T,
            "eps": sched.eps,
            "breakpoints": bps,
            "log_counts": logs,
            "slopes": slopes,
            "final_slope": slopes[-1],
            "gaps": ms.gaps,
            "trends": sched.trends(),
            "manifest": manifest.as_dict(include_timing=False),
        }
        body = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    else:
        body = emit_plotdata((bps, logs, slopes))
    return _deliver(args, body, manifest, t0)


def _cmd_moran_witness(args) -> int:
    t0 = time.perf_counter()
    sft = Sft.from_file(args.matrix)
    omega = parse_point(args.omega, K=sft.K)
    eps = _eps_chain(args.stages, args.tol)
    ratios = (
        [float(tok) for tok in args.ratios.split(",") if tok] if args.ratios else None
    )
    sched = build_schedule(args.t1, eps, ratios=ratios, cap=args.cap)
    wit = ml_witness(omega, sft, sched)
    horizon = args.horizon or sched.T[-1]
    v = classify_pair(omega, wit.point, horizon=horizon)
    lines = [f"{flag}={verdict}" for flag, verdict in v.flags.items()]
    lines.append(f"deviations={wit.deviation_count}")
    lines.append("stage,end,predicted_avg")
    for j, (end, pred) in enumerate(
        zip(wit.stage_ends, wit.predicted_end_averages), start=1
    ):
        lines.append(f"{j},{end},{_fmt(pred)}")
    return _deliver(args, "\n".join(lines) + "\n", _manifest(args, "moran witness"), t0)


def _cmd_check(args) -> int:
    names = "all" if args.names in ([], ["all"]) else args.names
    results = run_checks(names, quick=args.quick, seed=args.seed)
    failed = 0
    for r in results:
        tag = "ok" if r.passed else "FAIL"
        print(f"{tag:4s} {r.name:20s} {r.detail} [{r.seconds:.2f}s]")
        failed += 0 if r.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


# -- parser ------------------------------------------------------------


class _UsageExit(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # type: ignore[override]
        raise _UsageExit(message)


def _add_common(p, budget=True):
    p.add_argument("--seed", type=int, default=0, help="run seed (recorded)")
    p.add_argument("--threads", type=int, default=1, help="worker pool size; reductions are ordered, so output bytes never depend on it")
    p.add_argument("--out", default=None, help="output path (stdout if absent)")
    if budget:
        p.add_argument("--budget", type=int, default=DEFAULT_WORD_BUDGET, help="word enumeration budget")


def build_parser() -> _Parser:
    top = _Parser(prog="sftlab", description=__doc__)
    sub = top.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("classify", help="matrix structure: irreducibility, period, primitivity")
    p.add_argument("--matrix", required=True)
    _add_common(p, budget=False)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("entropy", help="topological entropy and metric dimension")
    p.add_argument("--matrix", required=True)
    _add_common(p, budget=False)
    p.set_defaults(func=_cmd_entropy)

    p = sub.add_parser("words", help="word counts per depth with slopes")
    p.add_argument("--matrix", required=True)
    p.add_argument("--max-n", type=int, default=20)
    _add_common(p, budget=False)
    p.set_defaults(func=_cmd_words)

    p = sub.add_parser("spectrum", help="Legendre spectrum over an alpha grid")
    p.add_argument("--matrix", required=True)
    p.add_argument("--potential", required=True)
    p.add_argument("--alphas", required=True, help="comma list or lo:hi:count")
    p.add_argument("--measure", default="parry", help="parry, uniform, none, or a file")
    p.add_argument("--n", type=int, default=12, help="partition depth")
    p.add_argument("--samples", type=int, default=8, help="omega samples for conditional pressure")
    p.add_argument("--eta", type=float, default=None, help="interiority margin override")
    p.add_argument("--p-tol", type=float, default=1e-6)
    _add_common(p)
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("gcount", help="level-set cylinder counts around targets")
    p.add_argument("--matrix", required=True)
    p.add_argument("--potential", required=True)
    p.add_argument("--omega", default=None, help="point literal, e.g. periodic:/0")
    p.add_argument("--targets", required=True, help="semicolon-separated target vectors")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--depths", required=True, help="comma list of depths")
    _add_common(p)
    p.set_defaults(func=_cmd_gcount)

    p = sub.add_parser("chaos-pair", help="pairwise chaos verdicts with margins")
    p.add_argument("--x", required=True, help="point literal")
    p.add_argument("--y", required=True, help="point literal")
    p.add_argument("--K", type=int, default=None, help="alphabet size for digit literals")
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--close", type=float, default=0.05)
    p.add_argument("--apart", type=float, default=0.3)
    _add_common(p, budget=False)
    p.set_defaults(func=_cmd_chaos_pair)

    p = sub.add_parser("transfer", help="blockwise map law checks")
    p.add_argument("--matrix", required=True)
    p.add_argument("--kind", choices=("full", "sft", "encode"), default="sft")
    p.add_argument("--M", type=int, default=4, help="block length")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--depth", type=int, default=512)
    _add_common(p, budget=False)
    p.set_defaults(func=_cmd_transfer)

    p = sub.add_parser("moran", help="Moran-construction builds and witnesses")
    msub = p.add_subparsers(dest="moran_cmd", required=True)

    b = msub.add_parser("build", help="assemble a frequency-library build")
    b.add_argument("--matrix", required=True)
    b.add_argument("--target", type=float, required=True, help="tracked-symbol frequency")
    b.add_argument("--tol", type=float, default=0.1, help="stage-1 band half-width")
    b.add_argument("--symbol", type=int, default=1)
    b.add_argument("--stages", type=int, default=4)
    b.add_argument("--t1", type=int, default=64)
    b.add_argument("--gaps", choices=("auto", "none", "r"), default="auto")
    b.add_argument("--ratios", default=None, help="explicit per-stage milestone ratios")
    b.add_argument("--cap", type=int, default=10**6)
    _add_common(b, budget=False)
    b.set_defaults(func=_cmd_moran_build)

    w = msub.add_parser("witness", help="copy/deviate witness against a reference stream")
    w.add_argument("--matrix", required=True)
    w.add_argument("--omega", required=True, help="point literal")
    w.add_argument("--stages", type=int, default=4)
    w.add_argument("--tol", type=float, default=0.5)
    w.add_argument("--t1", type=int, default=1024)
    w.add_argument("--ratios", default=None)
    w.add_argument("--cap", type=int, default=10**6)
    w.add_argument("--horizon", type=int, default=None)
    _add_common(w, budget=False)
    w.set_defaults(func=_cmd_moran_witness)

    p = sub.add_parser("check", help="standalone invariant suite")
    p.add_argument("names", nargs="*", default=["all"])
    p.add_argument("--quick", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_check)

    return top


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 64
    try:
        return args.func(args)
    except BudgetError as e:
        print(f"budget error: {e}", file=sys.stderr)
        return 3
    except SftlabError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main():  # console entry point
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
