"""Experiment plans, the batch runner and the artifact verifier.

A plan is a ``key=value`` file naming one of the experiments in
:data:`PLAN_NAMES` plus optional overrides.  :func:`run_experiment` writes

* ``results.csv``  -- deterministic rows, ordered by trial (no wall times),
* ``timing.csv``   -- per-trial wall times,
* ``trace.csv``    -- per-iteration solver traces (solver experiments only),
* ``metadata.txt`` -- the resolved plan, seeds, versions and runtimes,
* ``plot.txt`` and ``render_plot.py`` -- a declarative figure description
  and a small matplotlib script that draws it.

:func:`verify` re-reads those files and checks the theorem-level claims.
"""

from __future__ import annotations

import csv
import io
import math
import platform
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .conv_model import ConvOperator, LocalDictionary, mutual_coherence
from .errors import MissingArtifact, NoConvergence, PlanInvalid, SpecInvalid
from .io import dumps_keyvalue, format_float, load_dictionary, loads_keyvalue
from .metrics import CSV_COLUMNS, bound_report, coherence_threshold, omp_phase_threshold
from .pursuit_convex import (BpConfig, LambdaSchedule, bp_admm_local, bp_global_reference,
                             bp_ist_local, bp_trial, kkt_residuals, polish_bp, step_constant)
from .pursuit_greedy import omp_trial
from .signals import (RNG_NAME, SignalSpec, dct_local_dictionary, experiment_dictionary,
                      generate_instance)

PLAN_NAMES = ("fig2-omp-distance", "fig3a-omp-phase", "fig3b-bp-phase", "fig4-bp-linf",
              "fig5-admm-evolution", "fig6-convergence-time")

_BATCH_SPEC = dict(seed=1, cardinality="1,500", amplitude="uniform", scale="0.1,100",
                   noise="norm", noise_level=0.1)
_SOLVER_SPEC = dict(seed=0, cardinality=50, amplitude="band", scale="1,2",
                    noise="none", noise_level=0.0)

DEFAULTS = {
    "fig2-omp-distance": dict(trials=500, N=640, dictionary="builtin", **_BATCH_SPEC),
    "fig3a-omp-phase": dict(trials=500, N=640, dictionary="builtin", **_BATCH_SPEC),
    "fig3b-bp-phase": dict(trials=500, N=640, dictionary="builtin", bp_max_iterations=5000,
                           bp_tol=1e-10, **_BATCH_SPEC),
    "fig4-bp-linf": dict(trials=500, N=640, dictionary="builtin", bp_max_iterations=5000,
                         bp_tol=1e-10, **_BATCH_SPEC),
    "fig5-admm-evolution": dict(trials=1, N=300, dictionary="dct", rho=0.1, decay=0.99,
                                floor=1e-8, tol=1e-8, max_iterations=20000,
                                snapshots="20,200,1000", **_SOLVER_SPEC),
    "fig6-convergence-time": dict(trials=1, N=300, dictionary="dct", rho=0.1,
                                  sigmas="0.02,0.04,0.06", tol=1e-9, admm_tol=1e-8,
                                  max_iterations=100000, lockstep=50, trace_every=25,
                                  **_SOLVER_SPEC),
}

_SPEC_KEYS = ("seed", "cardinality", "amplitude", "scale", "noise", "noise_level")


@dataclass(frozen=True)
class ExperimentPlan:
    """A resolved experiment: defaults for ``name`` overlaid with user options."""

    name: str
    out: Path
    options: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        if self.name not in PLAN_NAMES:
            raise PlanInvalid(f"unknown experiment {self.name!r}; expected one of {PLAN_NAMES}")
        if self.workers < 1:
            raise PlanInvalid("workers must be >= 1")
        merged = dict(DEFAULTS[self.name])
        merged.update(self.options)
        object.__setattr__(self, "options", merged)
        if self.trials < 1:
            raise PlanInvalid("trials must be >= 1")
        if self.N < 1:
            raise PlanInvalid("N must be >= 1")
        try:
            self.spec.validate()
        except SpecInvalid as exc:
            raise PlanInvalid(str(exc)) from exc

    @property
    def trials(self) -> int:
        return int(self.options["trials"])

    @property
    def N(self) -> int:
        return int(self.options["N"])

    @property
    def spec(self) -> SignalSpec:
        return SignalSpec.from_mapping({k: self.options[k] for k in _SPEC_KEYS if k in self.options})

    def get(self, key, cast=float):
        return cast(self.options[key])

    def floats(self, key):
        return [float(v) for v in str(self.options[key]).split(",") if v.strip()]

    @classmethod
    def from_text(cls, text, base_dir: Path | str = "."):
        kv = loads_keyvalue(text)
        if "name" not in kv:
            raise PlanInvalid("plan has no 'name'")
        name = kv.pop("name")
        out = Path(kv.pop("out", f"runs/{name}"))
        if not out.is_absolute():
            out = Path(base_dir) / out
        try:
            workers = int(kv.pop("workers", 1))
        except ValueError as exc:
            raise PlanInvalid(f"bad workers value: {exc}") from exc
        unknown = set(kv) - set(DEFAULTS.get(name, kv))
        if unknown:
            raise PlanInvalid(f"unknown plan keys for {name}: {sorted(unknown)}")
        try:
            return cls(name=name, out=out, options=kv, workers=workers)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, PlanInvalid):
                raise
            raise PlanInvalid(str(exc)) from exc

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise MissingArtifact(f"cannot read plan {path}: {exc}") from exc
        return cls.from_text(text, base_dir=path.parent)

    def to_keyvalue(self) -> str:
        return dumps_keyvalue({"name": self.name, "workers": self.workers, **self.options})


# -- shared context ------------------------------------------------------------

@lru_cache(maxsize=8)
def _local_dictionary(source: str) -> LocalDictionary:
    if source == "builtin":
        return experiment_dictionary()
    if source == "dct":
        return dct_local_dictionary()
    return LocalDictionary(load_dictionary(source))


@lru_cache(maxsize=8)
def _operator(source: str, N: int):
    op = ConvOperator(_local_dictionary(source), N)
    return op, mutual_coherence(op)


def _ctx(plan):
    return _operator(str(plan.options["dictionary"]), plan.N)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(float(v))
    return str(v)


def _rel(a, b):
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a - b))


# -- per-trial workers -----------------------------------------------------------
# Each returns (rows, trace_rows, wall_time); rows are lists of already formatted cells.

OMP_COLUMNS = ("trial", "seed", "amplitude_scale") + CSV_COLUMNS + (
    "distance_l2", "distance_sq", "coherence_hyp", "coherence_bound", "full_hyp", "ratio",
    "phase_line", "below_line", "success", "reselections")


def _omp_trial(plan, trial):
    op, mu = _ctx(plan)
    start = time.perf_counter()
    row = omp_trial(op, plan.spec, trial, mu)
    inst = row["instance"]
    rep = bound_report(op, inst.gamma, inst.e, mu=mu, tol=0.0)
    cells = [_fmt(trial), _fmt(plan.spec.seed), _fmt(row["amplitude_scale"])] + rep.row()
    cells += [_fmt(row[k]) for k in OMP_COLUMNS[3 + len(CSV_COLUMNS):]]
    return [cells], [], time.perf_counter() - start


BP_COLUMNS = ("trial", "seed", "amplitude_scale") + CSV_COLUMNS + (
    "lam", "iterations", "solver_converged", "converged", "kkt_off", "kkt_on", "linf_error", "linf_ratio",
    "supp_subset", "full_support", "ratio", "guaranteed_recovered", "bp_support_size")


def _bp_trial(plan, trial):
    op, mu = _ctx(plan)
    start = time.perf_counter()
    row = bp_trial(op, plan.spec, trial, c=_step(plan), tol=plan.get("bp_tol"),
                   max_iterations=plan.get("bp_max_iterations", int))
    inst = row["instance"]
    rep = bound_report(op, inst.gamma, inst.e, mu=mu, tol=0.0)
    cells = [_fmt(trial), _fmt(plan.spec.seed), _fmt(row["amplitude_scale"])] + rep.row()
    cells += [_fmt(row[k]) for k in BP_COLUMNS[3 + len(CSV_COLUMNS):]]
    return [cells], [], time.perf_counter() - start


@lru_cache(maxsize=8)
def _step_cached(source, N):
    op, _ = _operator(source, N)
    return step_constant(op, BpConfig(lam=1.0))


def _step(plan):
    return _step_cached(str(plan.options["dictionary"]), plan.N)


FIG5_COLUMNS = ("trial", "seed", "iteration", "index", "gamma_true", "gamma_hat")


def _admm_evolution_trial(plan, trial):
    op, _ = _ctx(plan)
    spec = plan.spec
    start = time.perf_counter()
    inst = generate_instance(op, spec, trial)
    snaps = {int(s) for s in plan.floats("snapshots")}
    taken = {}

    def grab(k, code):
        if k in snaps:
            taken[k] = code.copy()

    cfg = BpConfig(schedule=LambdaSchedule(decay=plan.get("decay"), floor=plan.get("floor")),
                   tol=plan.get("tol"), max_iterations=plan.get("max_iterations", int))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoConvergence)
        res = bp_admm_local(op, inst.y, cfg, rho=plan.get("rho"), callback=grab)
    taken[res.iterations] = res.code.copy()
    rows = []
    for k in sorted(taken):
        for idx in range(op.N * op.m):
            rows.append([_fmt(trial), _fmt(spec.seed), _fmt(k), _fmt(idx),
                         _fmt(inst.gamma[idx]), _fmt(taken[k][idx])])
    trace = [[_fmt(trial), "admm", _fmt(t["iter"]), _fmt(t["objective"]), _fmt(t["primal_res"]),
              _fmt(t["wall_time"])] for t in res.trace]
    return rows, trace, time.perf_counter() - start


FIG6_COLUMNS = ("trial", "seed", "sigma", "solver", "lam", "iterations", "converged",
                "distance_true", "rel_to_reference", "rel_to_admm", "rel_to_ist_local",
                "kkt_off", "kkt_on", "lockstep_diff")
SOLVERS = ("reference", "ist-local", "admm")


def lockstep_difference(op, Y, cfg, iterations, c=None):
    """Largest ``|ist-local - reference|`` entry over the first ``iterations`` iterates."""
    c = step_constant(op, cfg) if c is None else c
    cfg = replace(cfg, max_iterations=iterations, tol=1e-300)
    ref, ist = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoConvergence)
        bp_global_reference(op, Y, cfg, c=c, callback=lambda k, g: ref.append(g.copy()),
                            record_trace=False)
        bp_ist_local(op, Y, cfg, c=c, callback=lambda k, g: ist.append(g.copy()),
                     record_trace=False)
    return max(float(np.abs(a - b).max()) for a, b in zip(ref, ist))


def noisy_lambda(sigma, op):
    """``sigma * sqrt(2 ln(N m))``, the penalty used for the noisy solver runs."""
    return sigma * math.sqrt(2.0 * math.log(op.N * op.m))


def _convergence_trial(plan, trial):
    op, _ = _ctx(plan)
    base = plan.spec
    start = time.perf_counter()
    c = _step(plan)
    every = plan.get("trace_every", int)
    rows, trace = [], []
    for sigma in plan.floats("sigmas"):
        spec = replace(base, noise="sigma", noise_level=sigma)
        inst = generate_instance(op, spec, trial)
        lam = noisy_lambda(sigma, op)
        cap = plan.get("max_iterations", int)
        cfgs = {"reference": BpConfig(lam=lam, tol=plan.get("tol"), max_iterations=cap),
                "ist-local": BpConfig(lam=lam, tol=plan.get("tol"), max_iterations=cap),
                "admm": BpConfig(lam=lam, tol=plan.get("admm_tol"), max_iterations=cap)}
        results = {}
        for name in SOLVERS:
            t0 = time.perf_counter()
            dist = []

            def cb(k, g, dist=dist, t0=t0):
                if k <= 100 or k % every == 0:
                    dist.append((k, float(np.linalg.norm(g - inst.gamma)), time.perf_counter() - t0))

            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NoConvergence)
                if name == "reference":
                    res = bp_global_reference(op, inst.y, cfgs[name], c=c, callback=cb, record_trace=False)
                elif name == "ist-local":
                    res = bp_ist_local(op, inst.y, cfgs[name], c=c, callback=cb, record_trace=False)
                else:
                    res = bp_admm_local(op, inst.y, cfgs[name], rho=plan.get("rho"), callback=cb,
                                        record_trace=False)
            results[name] = res
            trace += [[_fmt(trial), _fmt(sigma), name, _fmt(k), _fmt(d), _fmt(w)] for k, d, w in dist]
        lock = lockstep_difference(op, inst.y, cfgs["reference"], plan.get("lockstep", int), c=c)
        for name in SOLVERS:
            res = results[name]
            polished = polish_bp(op, inst.y, res.code, lam, supp_tol=1e-6)
            off, on = kkt_residuals(op, inst.y, polished, lam)
            rows.append([_fmt(v) for v in (
                trial, base.seed, sigma, name, lam, res.iterations, res.converged,
                float(np.linalg.norm(res.code - inst.gamma)),
                _rel(res.code, results["reference"].code), _rel(res.code, results["admm"].code),
                _rel(res.code, results["ist-local"].code), off, on,
                lock if name == "ist-local" else None)])
    return rows, trace, time.perf_counter() - start


_EXPERIMENTS = {
    "fig2-omp-distance": (_omp_trial, OMP_COLUMNS, ()),
    "fig3a-omp-phase": (_omp_trial, OMP_COLUMNS, ()),
    "fig3b-bp-phase": (_bp_trial, BP_COLUMNS, ()),
    "fig4-bp-linf": (_bp_trial, BP_COLUMNS, ()),
    "fig5-admm-evolution": (_admm_evolution_trial, FIG5_COLUMNS,
                            ("trial", "solver", "iter", "objective", "primal_res", "wall_time")),
    "fig6-convergence-time": (_convergence_trial, FIG6_COLUMNS,
                              ("trial", "sigma", "solver", "iter", "distance_true", "wall_time")),
}


def _run_one(args):
    plan, trial = args
    try:
        rows, trace, wall = _EXPERIMENTS[plan.name][0](plan, trial)
        return trial, rows, trace, wall, None
    except Exception as exc:                  # recorded per trial, never fatal
        return trial, [], [], 0.0, f"{type(exc).__name__}: {exc}"


# -- plot descriptions ---------------------------------------------------------

def plot_description(plan: ExperimentPlan, mu: float) -> dict:
    """Declarative figure description for ``plan``; rendered by ``render_plot.py``."""
    k = np.arange(1, 121)
    if plan.name == "fig2-omp-distance":
        bound_k = k[1.0 - mu * (k - 1) > 0]
        eps = plan.get("noise_level")
        return {"title": "OMP squared error vs stripe sparsity", "x": "l0_inf", "y": "distance_sq",
                "xscale": "linear", "yscale": "log", "series": "distance_sq",
                "line.bound.x": ",".join(str(v) for v in bound_k if v < coherence_threshold(mu)),
                "line.bound.y": ",".join(format_float(eps ** 2 / (1 - mu * (v - 1)))
                                         for v in bound_k if v < coherence_threshold(mu)),
                "vline.coherence": format_float(coherence_threshold(mu))}
    if plan.name in ("fig3a-omp-phase", "fig3b-bp-phase"):
        if plan.name == "fig3a-omp-phase":
            kk = k[(0.5 * mu * (1 + 1 / mu) - mu * k) > 0]
            line = {"line.theory.x": ",".join(str(v) for v in kk),
                    "line.theory.y": ",".join(format_float(omp_phase_threshold(mu, int(v))) for v in kk)}
        else:
            line = {"hline.theory": format_float(2.0 / 15.0)}
        return {"title": "support recovery", "x": "l0_inf", "y": "ratio", "xscale": "linear",
                "yscale": "log", "series": "ratio", "marker_by": "success" if plan.name ==
                "fig3a-omp-phase" else "full_support", **line}
    if plan.name == "fig4-bp-linf":
        return {"title": "BP l_inf error over eps_L", "x": "l0_inf", "y": "linf_ratio",
                "xscale": "linear", "yscale": "linear", "series": "linf_ratio",
                "hline.theory": "7.5", "vline.hypothesis": format_float((1 + 1 / mu) / 3)}
    if plan.name == "fig5-admm-evolution":
        return {"title": "ADMM code evolution", "x": "index", "y": "gamma_hat", "facet": "iteration",
                "xscale": "linear", "yscale": "linear", "series": "gamma_hat,gamma_true",
                "source": "results.csv"}
    return {"title": "distance to the true code over time", "x": "wall_time", "y": "distance_true",
            "xscale": "linear", "yscale": "log", "facet": "sigma", "series": "solver",
            "source": "trace.csv"}


RENDER_SCRIPT = '''"""Render plot.txt next to this script (needs matplotlib)."""
import csv
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).parent
desc = dict(l.split("=", 1) for l in (here / "plot.txt").read_text().splitlines() if "=" in l)
rows = list(csv.DictReader(open(here / desc.get("source", "results.csv"))))
facet = desc.get("facet")
groups = sorted({r[facet] for r in rows}, key=float) if facet else [None]
fig, axes = plt.subplots(1, len(groups), figsize=(5 * len(groups), 4), squeeze=False)
for ax, g in zip(axes[0], groups):
    sub = [r for r in rows if g is None or r[facet] == g]
    if desc["series"] == "solver":
        for s in sorted({r["solver"] for r in sub}):
            pts = [r for r in sub if r["solver"] == s]
            ax.plot([float(r[desc["x"]]) for r in pts], [float(r[desc["y"]]) for r in pts], label=s)
    else:
        for s in desc["series"].split(","):
            pts = [r for r in sub if r[desc["x"]] and r[s]]
            mark = desc.get("marker_by")
            if mark:
                for ok, m in (("1", "o"), ("0", "x")):
                    sel = [r for r in pts if r[mark] == ok]
                    ax.scatter([float(r[desc["x"]]) for r in sel], [float(r[s]) for r in sel], marker=m, s=8)
            else:
                ax.scatter([float(r[desc["x"]]) for r in pts], [float(r[s]) for r in pts], s=8, label=s)
    for key, val in desc.items():
        if key.startswith("line.") and key.endswith(".x"):
            ys = desc[key[:-2] + ".y"]
            ax.plot([float(v) for v in val.split(",")], [float(v) for v in ys.split(",")], "k-")
        elif key.startswith("hline."):
            ax.axhline(float(val), color="k", ls="--")
        elif key.startswith("vline."):
            ax.axvline(float(val), color="r", ls="--")
    ax.set_xscale(desc["xscale"]); ax.set_yscale(desc["yscale"])
    ax.set_xlabel(desc["x"]); ax.set_ylabel(desc["y"])
    ax.set_title(desc["title"] + (f" ({facet}={g})" if g else ""))
    ax.legend() if ax.get_legend_handles_labels()[0] else None
out = sys.argv[1] if len(sys.argv) > 1 else str(here / "figure.png")
fig.tight_layout(); fig.savefig(out, dpi=120)
print(out)
'''


# -- runner --------------------------------------------------------------------

def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


@dataclass
class RunSummary:
    out: Path
    rows: int
    failures: dict
    wall_time: float


def run_experiment(plan: ExperimentPlan) -> RunSummary:
    """Run every trial of ``plan`` and write the artifact set into ``plan.out``."""
    worker, columns, trace_columns = _EXPERIMENTS[plan.name]
    try:
        op, mu = _ctx(plan)
    except (OSError, ValueError) as exc:
        raise MissingArtifact(f"dictionary {plan.options['dictionary']!r}: {exc}") from exc
    if plan.spec.cardinality_range[1] > op.N * op.m:
        raise PlanInvalid("cardinality exceeds N*m")
    plan.out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    jobs = [(plan, t) for t in range(plan.trials)]
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            outcomes = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * plan.workers))))
    else:
        outcomes = [_run_one(j) for j in jobs]
    outcomes.sort(key=lambda o: o[0])          # deterministic order by trial

    rows, trace, timing, failures = [], [], [], {}
    for trial, r, tr, wall, err in outcomes:
        rows += r
        trace += tr
        timing.append([str(trial), format_float(wall)])
        if err is not None:
            failures[trial] = err
    total = time.perf_counter() - start

    _write_csv(plan.out / "results.csv", columns, rows)
    _write_csv(plan.out / "timing.csv", ("trial", "wall_time"), timing)
    if trace_columns:
        _write_csv(plan.out / "trace.csv", trace_columns, trace)
    if failures:
        _write_csv(plan.out / "failures.csv", ("trial", "error"), sorted(failures.items()))
    meta = {
        "experiment": plan.name, "code_version": __version__, "numpy": np.__version__,
        "scipy": scipy.__version__, "python": platform.python_version(), "rng": RNG_NAME,
        "seed_rule": "trial t uses Philox key seed + (t << 64)",
        "mu": mu, "N": op.N, "n": op.n, "m": op.m, "trials": plan.trials,
        "workers": plan.workers, "failed_trials": len(failures), "wall_time_total": total,
        "cardinality_law": "uniform over the integer range",
        "amplitude_law": "per-trial scale log-uniform over the range, entries uniform on [-a, a]"
        if plan.spec.amplitude == "uniform" else "magnitudes uniform on [lo, hi], random signs",
    }
    if plan.name in ("fig3b-bp-phase", "fig4-bp-linf"):
        meta["lambda_rule"] = "4 * eps_L"
    if plan.name == "fig6-convergence-time":
        meta["lambda_rule"] = "sigma * sqrt(2 ln(N m))"
    (plan.out / "metadata.txt").write_text(
        "# resolved plan\n" + plan.to_keyvalue() + "# run\n" + dumps_keyvalue(meta))
    (plan.out / "plot.txt").write_text(dumps_keyvalue(plot_description(plan, mu)))
    (plan.out / "render_plot.py").write_text(RENDER_SCRIPT)
    return RunSummary(out=plan.out, rows=len(rows), failures=failures, wall_time=total)


# -- verification ----------------------------------------------------------------

@dataclass
class VerifyReport:
    experiment: str
    checks: list = field(default_factory=list)         # (label, passed, detail)
    violations: list = field(default_factory=list)     # human-readable row citations

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def add(self, label, ok, detail=""):
        self.checks.append((label, bool(ok), detail))

    def render(self) -> str:
        out = io.StringIO()
        for label, ok, detail in self.checks:
            out.write(f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "") + "\n")
        for v in self.violations[:50]:
            out.write(f"  violated: {v}\n")
        if len(self.violations) > 50:
            out.write(f"  ... {len(self.violations) - 50} more\n")
        return out.getvalue()


def _read_rows(directory: Path, name="results.csv"):
    path = directory / name
    if not path.is_file():
        raise MissingArtifact(f"{path} not found")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise MissingArtifact(f"{path} has no rows")
    return rows


def _f(row, key):
    v = row[key]
    return float(v) if v != "" else None


def _cite(i, row, *keys):
    return f"row {i + 2} (trial {row['trial']}): " + ", ".join(f"{k}={row[k]}" for k in keys)


def verify(directory) -> VerifyReport:
    """Check the theorem-level claims against the artifacts in ``directory``."""
    directory = Path(directory)
    meta_path = directory / "metadata.txt"
    if not meta_path.is_file():
        raise MissingArtifact(f"{meta_path} not found")
    meta = loads_keyvalue(meta_path.read_text())
    name = meta.get("experiment") or meta.get("name")
    rows = _read_rows(directory)
    rep = VerifyReport(name)
    if name in ("fig2-omp-distance", "fig3a-omp-phase"):
        _verify_omp(rows, rep, name)
    elif name in ("fig3b-bp-phase", "fig4-bp-linf"):
        _verify_bp(rows, rep)
    elif name == "fig5-admm-evolution":
        _verify_evolution(rows, rep)
    elif name == "fig6-convergence-time":
        _verify_convergence(rows, rep)
    else:
        raise PlanInvalid(f"unknown experiment {name!r} in metadata")
    return rep


def _verify_omp(rows, rep, name):
    bad = []
    eligible = 0
    for i, r in enumerate(rows):
        if r["coherence_hyp"] == "1":
            eligible += 1
            if _f(r, "distance_sq") > _f(r, "coherence_bound"):
                bad.append(_cite(i, r, "l0_inf", "distance_sq", "coherence_bound"))
    rep.add("OMP squared error within eps^2/(1 - mu(k-1)) where k < (1+1/mu)/2", not bad,
            f"{eligible} eligible rows, {len(bad)} violations")
    rep.violations += bad
    bad = [_cite(i, r, "l0_inf", "ratio", "phase_line") for i, r in enumerate(rows)
           if r["below_line"] == "1" and r["success"] != "1"]
    below = sum(r["below_line"] == "1" for r in rows)
    rep.add("full support recovery strictly below the phase line", not bad,
            f"{below} rows below the line, {len(bad)} failures")
    rep.violations += bad
    if name == "fig3a-omp-phase":
        high = [r for r in rows if r["below_line"] != "1" and int(r["l0_inf"]) > 40]
        fails = sum(r["success"] != "1" for r in high)
        frac = fails / len(high) if high else 0.0
        rep.add("failure region above the line at l0_inf > 40 (>= 1% failures)",
                bool(high) and frac >= 0.01, f"{fails}/{len(high)} failures")


def _verify_bp(rows, rep):
    bad = []
    eligible = 0
    for i, r in enumerate(rows):
        if int(r["l0_inf"]) > 4 or _f(r, "eps_L") in (None, 0.0):
            continue
        eligible += 1
        if r["converged"] != "1":
            bad.append(_cite(i, r, "l0_inf", "converged", "kkt_off", "kkt_on"))
        if r["supp_subset"] != "1":
            bad.append(_cite(i, r, "l0_inf", "supp_subset", "bp_support_size", "l0"))
        if not _f(r, "linf_ratio") < 7.5:
            bad.append(_cite(i, r, "l0_inf", "linf_ratio"))
        if _f(r, "ratio") is not None and _f(r, "ratio") < 2 / 15 and r["full_support"] != "1":
            bad.append(_cite(i, r, "l0_inf", "ratio", "full_support"))
        if r["guaranteed_recovered"] != "1":
            bad.append(_cite(i, r, "l0_inf", "guaranteed_recovered"))
    rep.add("BP with lam = 4 eps_L: support inside the true one, l_inf error < 7.5 eps_L, "
            "full recovery when eps_L/|Gamma_min| < 2/15, certified minimizer (rows with l0_inf <= 4)",
            not bad, f"{eligible} eligible rows, {len(bad)} violations")
    rep.violations += bad
    _verify_kkt(rows, rep, lambda r: "1" in (r["converged"], r["solver_converged"]))


def _verify_kkt(rows, rep, selected):
    bad = [_cite(i, r, "kkt_off", "kkt_on") for i, r in enumerate(rows)
           if selected(r) and not (_f(r, "kkt_off") <= 1e-4 and _f(r, "kkt_on") <= 1e-4)]
    n = sum(1 for r in rows if selected(r))
    rep.add("KKT conditions within 1e-4 relative on converged solutions", not bad,
            f"{n} converged rows, {len(bad)} violations")
    rep.violations += bad


def _verify_evolution(rows, rep):
    by_trial = {}
    for r in rows:
        by_trial.setdefault(r["trial"], []).append(r)
    for trial, rs in sorted(by_trial.items(), key=lambda kv: int(kv[0])):
        last = max(int(r["iteration"]) for r in rs)
        fin = [r for r in rs if int(r["iteration"]) == last]
        dist = math.sqrt(sum((_f(r, "gamma_hat") - _f(r, "gamma_true")) ** 2 for r in fin))
        rep.add(f"trial {trial}: noiseless ADMM recovers the code (||G_hat - G|| < 1e-4)",
                dist < 1e-4, f"distance {dist:.3g} after {last} iterations")


def _verify_convergence(rows, rep):
    bad = []
    for i, r in enumerate(rows):
        for key in ("rel_to_reference", "rel_to_admm", "rel_to_ist_local"):
            if _f(r, key) > 1e-4:
                bad.append(_cite(i, r, "sigma", "solver", key))
    rep.add("admm, ist-local and reference agree pairwise within 1e-4 relative", not bad,
            f"{len(rows)} rows, {len(bad)} violations")
    rep.violations += bad
    lock = [(i, r) for i, r in enumerate(rows) if r["lockstep_diff"] != ""]
    bad = [_cite(i, r, "sigma", "lockstep_diff") for i, r in lock if _f(r, "lockstep_diff") > 1e-10]
    rep.add("ist-local matches the reference iterate for iterate (1e-10)", lock and not bad,
            f"{len(lock)} rows")
    rep.violations += bad
    _verify_kkt(rows, rep, lambda r: r["converged"] == "1")
