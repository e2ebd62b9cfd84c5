"""Experiment runner and property suite.

Experiments are declared in a TOML file (nested key-value tables; grammar in
the README): a domain, a norm, a Young function, a boundary condition, a
load family, mesh sizes, and optional sweep/assertion tables.  `run`
executes the declared sweep, writes one CSV row per (instance, mesh) with
the solved gradient statistics and every verification ratio, and renders an
SVG of ratio against the sweep parameter.  Reruns with the same config and
seed produce byte-identical CSV; wall-clock timings therefore go to a
companion .runtimes.txt file instead of the CSV.

`property_suite` replays the randomized invariants of every module under a
fixed seed and reports per-property counts; any violation carries a witness.
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import geometry, norm_field, rearrangement, solver, young
from .geometry import make_domain, triangulate
from .norm_field import MonotoneField, PolynomialField, make_norm
from .rearrangement import SampledFunction, decreasing_rearrangement, distribution_function
from .solver import (DiscreteProblem, SmoothField, bump_field, energy_estimate_check,
                     gradient_bound_ratio, manufactured_problem, natural_growth_solve,
                     solve)
from .svgplot import line_plot
from .young import PowerSumYoung, PowerYoung, TabulatedYoung, make_young

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "run",
    "report",
    "property_suite",
    "PropertyResult",
    "monotonicity_violation",
    "COLUMNS",
]


class ConfigError(ValueError):
    pass


COLUMNS: list[tuple[str, str]] = [
    ("instance", "sweep instance index"),
    ("parameter", "sweep parameter value (load scale, k, or kappa)"),
    ("mesh_h", "target edge length passed to the mesher"),
    ("n_vertices", "mesh vertex count"),
    ("n_triangles", "mesh triangle count"),
    ("grad_sup", "max over triangles of |grad u|"),
    ("grad_sup_H", "max over triangles of H(grad u)"),
    ("xn2_f", "rearrangement-based load norm ||f||_{X_2}"),
    ("l2_f", "L^2 norm of f"),
    ("energy_lhs", "int B(H(grad u)) dx"),
    ("energy_rhs", "conjugate of B at ||f||_{L^2}"),
    ("energy_ratio", "energy_lhs / energy_rhs"),
    ("bound_ratio", "grad_sup / b^{-1}(||f||_{X_2})"),
    ("kk_ratio", "natural-growth bound ratio (blank when kappa = 0)"),
    ("grad_err", "sup gradient error vs the manufactured oracle (blank otherwise)"),
    ("newton_iters", "total Newton iterations over the continuation"),
    ("status", "ok | error:<message>"),
]

_PROFILE_FIELDS = {
    "quartic": bump_field,
    "dome": None,  # filled below
    "tensor": None,
}


def _dome_field(amplitude: float = 1.0) -> SmoothField:
    def val(x):
        x = np.asarray(x, float)
        return amplitude * (1.0 - np.sum(x * x, axis=-1))

    def grad(x):
        x = np.asarray(x, float)
        return -2.0 * amplitude * np.ones(x.shape[:-1])[..., None] * x

    return SmoothField(val, grad)


def _tensor_field(amplitude: float = 1.0) -> SmoothField:
    def val(x):
        x = np.asarray(x, float)
        return amplitude * (1 - x[..., 0] ** 2) * (1 - x[..., 1] ** 2)

    def grad(x):
        x = np.asarray(x, float)
        gx = -2 * x[..., 0] * (1 - x[..., 1] ** 2)
        gy = -2 * x[..., 1] * (1 - x[..., 0] ** 2)
        return amplitude * np.stack([gx, gy], axis=-1)

    return SmoothField(val, grad)


_PROFILE_FIELDS["dome"] = _dome_field
_PROFILE_FIELDS["tensor"] = _tensor_field


_KNOWN_TABLES = {"experiment", "domain", "norm", "young", "problem", "load",
                 "sweep", "assertions"}


@dataclass
class ExperimentConfig:
    name: str
    seed: int
    domain: dict
    norm: dict
    young: dict
    bc: str
    mesh_sizes: list
    eps_schedule: tuple
    kappa: float
    load: dict
    sweep: dict
    assertions: dict

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"{path}: no such config file")
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}")
        return cls.from_dict(data, origin=str(path))

    @classmethod
    def from_dict(cls, data: dict, origin: str = "<config>") -> "ExperimentConfig":
        unknown = set(data) - _KNOWN_TABLES
        if unknown:
            raise ConfigError(f"{origin}: unknown tables {sorted(unknown)}")
        for table in ("experiment", "domain", "norm", "young", "problem", "load"):
            if table not in data:
                raise ConfigError(f"{origin}: missing [{table}] table")
        exp = data["experiment"]
        if "name" not in exp:
            raise ConfigError(f"{origin}: [experiment] needs a name")
        prob = data["problem"]
        if "mesh_sizes" not in prob or not prob["mesh_sizes"]:
            raise ConfigError(f"{origin}: [problem] needs non-empty mesh_sizes")
        bc = prob.get("bc", "dirichlet")
        if bc not in ("dirichlet", "neumann"):
            raise ConfigError(f"{origin}: bc must be dirichlet or neumann, got {bc!r}")
        cfg = cls(
            name=str(exp["name"]),
            seed=int(exp.get("seed", 1234)),
            domain=dict(data["domain"]),
            norm=dict(data["norm"]),
            young=dict(data["young"]),
            bc=bc,
            mesh_sizes=[float(h) for h in prob["mesh_sizes"]],
            eps_schedule=tuple(float(e) for e in prob.get(
                "eps_schedule", solver.DEFAULT_EPS_SCHEDULE)),
            kappa=float(prob.get("kappa", 0.0)),
            load=dict(data["load"]),
            sweep=dict(data.get("sweep", {})),
            assertions=dict(data.get("assertions", {})),
        )
        # fail fast on unresolvable constructors
        try:
            make_domain(cfg.domain)
            make_norm(cfg.norm)
            make_young(cfg.young)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"{origin}: {exc}")
        kind = cfg.load.get("kind")
        if kind not in ("constant", "radial_power", "concentrating", "manufactured_bump"):
            raise ConfigError(f"{origin}: unknown load kind {kind!r}")
        if cfg.kappa != 0.0 and kind == "manufactured_bump":
            raise ConfigError(f"{origin}: manufactured loads do not combine with kappa != 0")
        return cfg

    def instances(self) -> list[tuple[str, float]]:
        """(parameter name, value) per sweep instance."""
        if "k_values" in self.sweep:
            return [("k", float(k)) for k in self.sweep["k_values"]]
        scales = self.sweep.get("load_scales", [1.0])
        return [("scale", float(s)) for s in scales]


def _build_problem(cfg: ExperimentConfig, dom, mesh, param_name: str, param: float):
    """Returns (problem, u_exact or None)."""
    load = cfg.load
    kind = load["kind"]
    scale = param if param_name == "scale" else float(load.get("scale", 1.0))
    if kind == "manufactured_bump":
        profile = load.get("profile", "quartic")
        if profile not in _PROFILE_FIELDS:
            raise ConfigError(f"unknown manufactured profile {profile!r}")
        u_exact = _PROFILE_FIELDS[profile](float(load.get("amplitude", 1.0)) * scale)
        prob = manufactured_problem(u_exact, mesh, make_young(cfg.young),
                                    make_norm(cfg.norm), bc=cfg.bc,
                                    eps_schedule=cfg.eps_schedule)
        return prob, u_exact
    if kind == "constant":
        f = np.full(mesh.n_triangles, float(load.get("value", 1.0)) * scale)
    elif kind == "radial_power":
        r = np.linalg.norm(mesh.centroids, axis=1)
        f = float(load.get("amplitude", 1.0)) * scale * r ** float(load["exponent"])
    else:  # concentrating
        k = param if param_name == "k" else float(load["k"])
        r = np.linalg.norm(mesh.centroids, axis=1)
        f = np.where(r <= 1.0 / k, k * k, 0.0) * scale
        if not np.any(f):
            raise ConfigError(f"concentrating load k={k:g} is below mesh resolution")
    if load.get("mean_adjust", cfg.bc == "neumann"):
        f = f - np.dot(f, mesh.areas) / mesh.areas.sum()
    prob = DiscreteProblem(mesh, cfg.bc, f, make_young(cfg.young),
                           make_norm(cfg.norm), eps_schedule=cfg.eps_schedule)
    return prob, None


def _run_one(cfg: ExperimentConfig, dom, mesh, h: float, idx: int,
             param_name: str, param: float) -> tuple[dict, float]:
    row = {
        "instance": idx, "parameter": param, "mesh_h": h,
        "n_vertices": mesh.n_vertices, "n_triangles": mesh.n_triangles,
        "grad_sup": "", "grad_sup_H": "", "xn2_f": "", "l2_f": "",
        "energy_lhs": "", "energy_rhs": "", "energy_ratio": "",
        "bound_ratio": "", "kk_ratio": "", "grad_err": "",
        "newton_iters": "", "status": "ok",
    }
    t0 = time.perf_counter()
    try:
        prob, u_exact = _build_problem(cfg, dom, mesh, param_name, param)
        if cfg.kappa != 0.0:
            ng = natural_growth_solve(prob, cfg.kappa)
            sol, grads = ng.inner, ng.tri_grads
            row["kk_ratio"] = ng.bound_ratio
            row["grad_sup"] = ng.grad_sup
            row["grad_sup_H"] = float(np.max(prob.norm(grads)))
            row["newton_iters"] = sol.newton_iters
        else:
            sol = solve(prob)
            grads = sol.tri_grads
            row["grad_sup"] = sol.grad_sup
            row["grad_sup_H"] = sol.grad_sup_H
            row["newton_iters"] = sol.newton_iters
            lhs, rhs, ratio = energy_estimate_check(sol, prob)
            row["energy_lhs"], row["energy_rhs"], row["energy_ratio"] = lhs, rhs, ratio
            try:
                row["bound_ratio"] = gradient_bound_ratio(sol, prob)
            except ValueError:
                pass
        row["l2_f"] = math.sqrt(float(np.dot(mesh.areas, prob.f_cells ** 2)))
        row["xn2_f"] = rearrangement.xn_norm(prob.f, 2)
        if u_exact is not None:
            ge = u_exact.grad(mesh.centroids)
            row["grad_err"] = float(np.max(np.linalg.norm(grads - ge, axis=1)))
    except Exception as exc:  # recorded per-row; the run exits nonzero
        row["status"] = f"error:{type(exc).__name__}:{exc}"
    return row, time.perf_counter() - t0


def run(config, out_dir=".") -> tuple[int, list[str]]:
    """Execute a config (path or ExperimentConfig).  Returns (exit_code,
    messages); 0 only if every row solved and every declared assertion holds."""
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_file(config)
    cfg = config
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dom = make_domain(cfg.domain)
    meshes = {h: triangulate(dom, h) for h in cfg.mesh_sizes}
    tasks = []
    for idx, (pname, pval) in enumerate(cfg.instances()):
        for h in cfg.mesh_sizes:
            tasks.append((idx, pname, pval, h))

    n_threads = int(os.environ.get("ANISOLAP_THREADS", "1"))
    results: list[tuple[dict, float]] = [None] * len(tasks)  # type: ignore
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            futs = {pool.submit(_run_one, cfg, dom, meshes[h], h, idx, pname, pval): i
                    for i, (idx, pname, pval, h) in enumerate(tasks)}
            for fut, i in futs.items():
                results[i] = fut.result()
    else:
        for i, (idx, pname, pval, h) in enumerate(tasks):
            results[i] = _run_one(cfg, dom, meshes[h], h, idx, pname, pval)

    rows = [r for r, _ in results]
    timings = [t for _, t in results]
    messages = [f"row {i}: {r['status']}" for i, r in enumerate(rows)
                if r["status"] != "ok"]
    failures = _check_assertions(cfg, rows)
    messages.extend(failures)

    csv_path = out_dir / f"{cfg.name}.csv"
    _write_csv(csv_path, cfg, rows)
    with open(out_dir / f"{cfg.name}.runtimes.txt", "w") as fh:
        for (idx, pname, pval, h), t in zip(tasks, timings):
            fh.write(f"instance={idx} {pname}={pval:g} h={h:g} seconds={t:.3f}\n")
    _plot_rows(rows, out_dir / f"{cfg.name}.svg",
               title=f"{cfg.name}: bound ratio", ycol="bound_ratio" if cfg.kappa == 0.0
               else "kk_ratio")
    return (0 if not messages else 1), messages


def _check_assertions(cfg: ExperimentConfig, rows: list[dict]) -> list[str]:
    out = []
    asserts = cfg.assertions
    by_instance: dict[int, list[dict]] = {}
    for r in rows:
        by_instance.setdefault(r["instance"], []).append(r)
    if "grad_sup_target" in asserts:
        target = float(asserts["grad_sup_target"])
        rtol = float(asserts.get("grad_sup_rtol", 0.02))
        for idx, rs in by_instance.items():
            finest = min(rs, key=lambda r: r["mesh_h"])
            if finest["status"] != "ok":
                continue
            got = finest["grad_sup"]
            if abs(got - target) > rtol * abs(target):
                out.append(f"assert grad_sup: instance {idx} got {got:.6g}, "
                           f"target {target:.6g} rtol {rtol:g}")
    if asserts.get("monotone_grad_err", False):
        for idx, rs in by_instance.items():
            errs = [r["grad_err"] for r in sorted(rs, key=lambda r: -r["mesh_h"])
                    if r["status"] == "ok" and r["grad_err"] != ""]
            if any(e1 <= e2 for e1, e2 in zip(errs, errs[1:])):
                out.append(f"assert monotone_grad_err: instance {idx} errors {errs}")
    if "ratio_stability_pct" in asserts:
        pct = float(asserts["ratio_stability_pct"]) / 100.0
        key = "kk_ratio" if cfg.kappa != 0.0 else "bound_ratio"
        for idx, rs in by_instance.items():
            fine = sorted((r for r in rs if r["status"] == "ok" and r[key] != ""),
                          key=lambda r: r["mesh_h"])[:2]
            if len(fine) == 2:
                a, b = fine[0][key], fine[1][key]
                if abs(a - b) > pct * max(abs(a), abs(b)):
                    out.append(f"assert ratio_stability: instance {idx} "
                               f"{b:.6g} -> {a:.6g} exceeds {100 * pct:g}%")
    if "max_energy_ratio" in asserts:
        cap = float(asserts["max_energy_ratio"])
        for r in rows:
            if r["status"] == "ok" and r["energy_ratio"] != "" and r["energy_ratio"] > cap:
                out.append(f"assert max_energy_ratio: row instance={r['instance']} "
                           f"h={r['mesh_h']:g} ratio {r['energy_ratio']:.6g} > {cap:g}")
    return out


def _write_csv(path, cfg: ExperimentConfig, rows: list[dict]) -> None:
    buf = io.StringIO()
    buf.write(f"# experiment: {cfg.name}\n")
    buf.write(f"# seed: {cfg.seed}\n")
    for name, doc in COLUMNS:
        buf.write(f"# column {name}: {doc}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([name for name, _ in COLUMNS])
    for r in rows:
        writer.writerow([repr(r[name]) if isinstance(r[name], float) else r[name]
                         for name, _ in COLUMNS])
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def _plot_rows(rows: list[dict], path, title: str, ycol: str) -> None:
    series = {}
    for r in rows:
        if r["status"] != "ok" or r[ycol] == "":
            continue
        series.setdefault(r["mesh_h"], []).append((r["parameter"], r[ycol]))
    plot = []
    for h, pts in sorted(series.items()):
        pts.sort()
        plot.append((f"h={h:g}", [p for p, _ in pts], [v for _, v in pts]))
    if plot:
        line_plot(plot, path, title=title, xlabel="sweep parameter", ylabel=ycol)


def report(csv_path, svg_path, xcol: str = "parameter", ycol: str = "bound_ratio") -> None:
    """Re-plot columns of an existing run CSV."""
    rows = []
    with open(csv_path) as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        for rec in reader:
            rows.append(rec)
    if not rows:
        raise ConfigError(f"{csv_path}: no data rows")
    if xcol not in rows[0] or ycol not in rows[0]:
        raise ConfigError(f"{csv_path}: unknown columns {xcol!r}/{ycol!r}")
    series: dict[str, list[tuple[float, float]]] = {}
    for rec in rows:
        if rec["status"] != "ok" or rec[ycol] in ("", None):
            continue
        series.setdefault(rec["mesh_h"], []).append((float(rec[xcol]), float(rec[ycol])))
    plot = [(f"h={h}", [p for p, _ in sorted(pts)], [v for _, v in sorted(pts)])
            for h, pts in sorted(series.items(), key=lambda kv: float(kv[0]))]
    line_plot(plot, svg_path, title=Path(csv_path).stem, xlabel=xcol, ylabel=ycol)


# ---------------------------------------------------------------------------
# Property suite
# ---------------------------------------------------------------------------


@dataclass
class PropertyResult:
    name: str
    draws: int
    violations: int
    witness: str = ""
    constants: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0


def monotonicity_violation(b, grid) -> int | None:
    """Index of the first decreasing step of b on the grid, or None."""
    vals = np.asarray(b(np.asarray(grid, dtype=float)))
    bad = np.nonzero(np.diff(vals) < -1e-12 * np.maximum(1.0, np.abs(vals[:-1])))[0]
    return int(bad[0]) if bad.size else None


def _registered_youngs():
    return [
        ("power2", PowerYoung(2.0)),
        ("power3", PowerYoung(3.0)),
        ("power1.5", PowerYoung(1.5)),
        ("blend2_4", PowerSumYoung(2.0, 4.0)),
        ("tabulated", TabulatedYoung([0.0, 0.5, 1.0, 2.0, 4.0],
                                     [0.0, 0.4, 1.0, 2.5, 7.0])),
    ]


def _registered_norms():
    return [
        ("euclidean", norm_field.EuclideanNorm(2)),
        ("ellipse41", norm_field.EllipseNorm(np.diag([4.0, 1.0]))),
        ("powersum24", norm_field.PowerSumNorm(2.0, 4.0)),
    ]


def property_suite(seed: int = 1234, scale: float = 1.0) -> list[PropertyResult]:
    """Run every module invariant on seeded random draws; deterministic."""
    results: list[PropertyResult] = []
    n = lambda k: max(8, int(k * scale))

    # --- Young functions --------------------------------------------------
    rng = np.random.default_rng([seed, 1])
    viol, wit, draws = 0, "", 0
    for name, yf in _registered_youngs():
        s = rng.uniform(0, 5, n(300))
        t = s + rng.uniform(0, 5, n(300))
        th = rng.uniform(0, 1, n(300))
        draws += s.size
        lhs = yf.B(th * s + (1 - th) * t)
        rhs = th * yf.B(s) + (1 - th) * yf.B(t)
        bad = lhs > rhs + 1e-9 * (1 + np.abs(rhs))
        if np.any(bad) and not wit:
            i = int(np.argmax(bad))
            viol += int(bad.sum())
            wit = f"{name}: s={s[i]:.4g} t={t[i]:.4g} theta={th[i]:.4g}"
    results.append(PropertyResult("young.convexity", draws, viol, wit))

    rng = np.random.default_rng([seed, 2])
    viol, wit, draws = 0, "", 0
    for name, yf in _registered_youngs():
        t = rng.uniform(1e-3, 50, n(1000))
        draws += t.size
        B, bt = yf.B(t), yf.b(t)
        low = 0.5 * t * yf.b(0.5 * t)
        bad = (B > bt * t * (1 + 1e-9)) | (B < low * (1 - 1e-9) - 1e-12)
        if np.any(bad) and not wit:
            viol += int(bad.sum())
            wit = f"{name}: t={t[np.argmax(bad)]:.4g}"
    results.append(PropertyResult("young.B_between_tb_halves", draws, viol, wit))

    rng = np.random.default_rng([seed, 3])
    viol, wit, consts = 0, "", {}
    grid = np.geomspace(1e-3, 1e3, n(400))
    for name, yf in _registered_youngs():
        for k in (0.5, 2.0, 10.0):
            cb = float(np.max(yf.b(k * grid) / yf.b(grid)))
            conj = np.array([yf.conjugate(t) for t in np.geomspace(1e-2, 1e2, n(40))])
            conj_k = np.array([yf.conjugate(k * t) for t in np.geomspace(1e-2, 1e2, n(40))])
            cc = float(np.max(conj_k / np.maximum(conj, 1e-300)))
            consts[f"{name}.k{k:g}"] = (cb, cc)
            if not (math.isfinite(cb) and math.isfinite(cc)):
                viol += 1
                wit = f"{name} k={k}"
    results.append(PropertyResult("young.doubling_constants", len(consts), viol, wit, consts))

    viol, wit, consts = 0, "", {}
    for name, yf in _registered_youngs():
        tg = np.geomspace(1e-2, 1e2, n(60))
        c = float(np.max(np.array([yf.conjugate(float(yf.b(np.asarray(t)))) for t in tg])
                         / yf.B(tg)))
        consts[name] = c
        if not math.isfinite(c):
            viol += 1
            wit = name
    results.append(PropertyResult("young.conjugate_of_b_vs_B", len(consts), viol, wit, consts))

    viol, wit = 0, ""
    for name, yf in _registered_youngs():
        for eps in (0.3, 1e-2):
            reg = yf.regularize(eps)
            i_est, s_est = reg.estimate_a_indices()
            lo, hi = min(yf.i_a, 0.0), max(yf.s_a, 0.0)
            if i_est < lo - 1e-6 or s_est > hi + 1e-6:
                viol += 1
                wit = f"{name} eps={eps}: [{i_est:.3g},{s_est:.3g}] vs [{lo:.3g},{hi:.3g}]"
    results.append(PropertyResult("young.regularized_index_range",
                                  2 * len(_registered_youngs()), viol, wit))

    rng = np.random.default_rng([seed, 4])
    viol, wit, draws = 0, "", 0
    for name, yf in _registered_youngs():
        t = rng.uniform(0.1, 10, n(50))
        h = 1e-6 * t
        draws += t.size
        fd = (yf.B(t + h) - yf.B(t - h)) / (2 * h)
        rel = np.abs(fd - yf.b(t)) / np.maximum(np.abs(yf.b(t)), 1e-12)
        bad = rel > 1e-6
        if np.any(bad) and not wit:
            viol += int(bad.sum())
            wit = f"{name}: t={t[np.argmax(bad)]:.4g} rel={rel.max():.2e}"
    results.append(PropertyResult("young.derivative_consistency", draws, viol, wit))

    viol, wit = 0, ""
    grid = np.geomspace(1e-2, 1e2, 200)
    for name, yf in _registered_youngs():
        idx = monotonicity_violation(yf.b, grid)
        if idx is not None:
            viol += 1
            wit = f"{name}: decreasing at grid[{idx}]={grid[idx]:.4g}"
    results.append(PropertyResult("young.b_monotone", len(_registered_youngs()) * grid.size,
                                  viol, wit))

    # --- norms and fields --------------------------------------------------
    rng = np.random.default_rng([seed, 5])
    viol, wit, draws = 0, "", 0
    for nname, nrm in _registered_norms():
        xi = rng.normal(size=(n(400), 2))
        xi *= np.exp(rng.uniform(math.log(1e-2), math.log(1e2), xi.shape[0]))[:, None] \
            / np.linalg.norm(xi, axis=1)[:, None]
        draws += xi.shape[0]
        H = nrm(xi)
        r2 = np.sum(xi * xi, axis=1)
        gn = np.linalg.norm(nrm.grad(xi), axis=1)
        euler = np.abs(np.einsum("md,md->m", nrm.grad(xi), xi) - H)
        t = rng.uniform(0.5, 3.0, xi.shape[0])
        hom = np.abs(nrm(t[:, None] * xi) - t * H)
        bad = ((H * H < nrm.lam * r2 * (1 - 1e-8)) | (H * H > nrm.Lam * r2 * (1 + 1e-8))
               | (gn < math.sqrt(nrm.lam) * (1 - 1e-8)) | (gn > math.sqrt(nrm.Lam) * (1 + 1e-8))
               | (euler > 1e-8 * (1 + H)) | (hom > 1e-8 * (1 + H)))
        if np.any(bad) and not wit:
            viol += int(bad.sum())
            wit = f"{nname}: xi={xi[np.argmax(bad)]}"
    results.append(PropertyResult("norm.ellipticity_homogeneity", draws, viol, wit))

    rng = np.random.default_rng([seed, 6])
    viol, wit, draws = 0, "", 0
    for nname, nrm in _registered_norms():
        for yname, yf in _registered_youngs()[:3]:
            F = MonotoneField(nrm, yf)
            xi = rng.normal(size=(n(300), 2))
            xi *= np.exp(rng.uniform(math.log(1e-2), math.log(1e2), xi.shape[0]))[:, None] \
                / np.linalg.norm(xi, axis=1)[:, None]
            draws += xi.shape[0]
            h = 1e-6 * np.maximum(1.0, np.linalg.norm(xi, axis=1))[:, None]
            fd = np.stack(
                [(F.potential(xi + h * e) - F.potential(xi - h * e)) / (2 * h[:, 0])
                 for e in np.eye(2)], axis=-1)
            A = F(xi)
            rel = np.linalg.norm(fd - A, axis=1) / np.maximum(np.linalg.norm(A, axis=1), 1e-10)
            bad = rel > 1e-6
            if np.any(bad) and not wit:
                viol += int(bad.sum())
                wit = f"{nname}/{yname}: rel={rel.max():.2e}"
    results.append(PropertyResult("field.is_gradient_of_potential", draws, viol, wit))

    rng = np.random.default_rng([seed, 7])
    viol, wit, draws = 0, "", 0
    for nname, nrm in _registered_norms():
        for yname, yf in _registered_youngs()[:3]:
            F = MonotoneField(nrm, yf)
            xi = rng.normal(size=(n(2000), 2)) * 3
            eta = xi + rng.normal(size=xi.shape) * rng.uniform(1e-4, 2, (xi.shape[0], 1))
            draws += xi.shape[0]
            val = np.einsum("md,md->m", F(xi) - F(eta), xi - eta)
            bad = val <= 0
            if np.any(bad) and not wit:
                viol += int(bad.sum())
                wit = f"{nname}/{yname}: xi={xi[np.argmax(bad)]}, eta={eta[np.argmax(bad)]}"
    results.append(PropertyResult("field.strict_monotonicity", draws, viol, wit))

    rng = np.random.default_rng([seed, 8])
    viol, wit, draws = 0, "", 0
    for p in (2.0, 3.0, 1.5):
        F = MonotoneField(norm_field.EllipseNorm(np.diag([4.0, 1.0])), PowerYoung(p))
        xi = rng.normal(size=(n(200), 2))
        t = rng.uniform(0.1, 10, xi.shape[0])
        draws += xi.shape[0]
        lhs = F(t[:, None] * xi)
        rhs = (t ** (p - 1.0))[:, None] * F(xi)
        bad = np.linalg.norm(lhs - rhs, axis=1) > 1e-8 * (1 + np.linalg.norm(rhs, axis=1))
        if np.any(bad) and not wit:
            viol += int(bad.sum())
            wit = f"p={p}"
    results.append(PropertyResult("field.power_homogeneity", draws, viol, wit))

    rng = np.random.default_rng([seed, 9])
    consts, viol, wit = {}, 0, ""
    for nname, nrm in _registered_norms():
        for yname, yf in _registered_youngs()[:3]:
            xi = rng.normal(size=(n(500), 2)) * rng.uniform(0.05, 20, (n(500), 1))
            ratio_B = yf.B(nrm(xi)) / np.maximum(yf.B(np.linalg.norm(xi, axis=1)), 1e-300)
            ratio_b = yf.b(nrm(xi)) / np.maximum(yf.b(np.linalg.norm(xi, axis=1)), 1e-300)
            key = f"{nname}/{yname}"
            consts[key] = (float(ratio_B.min()), float(ratio_B.max()),
                           float(ratio_b.min()), float(ratio_b.max()))
            if not all(map(math.isfinite, consts[key])) or ratio_B.min() <= 0:
                viol += 1
                wit = key
    results.append(PropertyResult("field.norm_equivalence_constants", len(consts), viol,
                                  wit, consts))

    # --- rearrangements ----------------------------------------------------
    rng = np.random.default_rng([seed, 10])
    viol, wit, draws = 0, "", 0
    for _ in range(n(20)):
        f = SampledFunction(rng.normal(size=30), rng.uniform(0.1, 1, 30))
        # the rearrangement carries the same (value, weight) multiset
        order = np.argsort(-np.abs(f.values), kind="stable")
        fstar_sf = SampledFunction(np.abs(f.values)[order], f.weights[order])
        ts = rng.uniform(0, np.abs(f.values).max() * 1.1, n(100))
        draws += ts.size
        for t in ts:
            if distribution_function(f, float(t)) != distribution_function(fstar_sf, float(t)):
                viol += 1
                wit = f"t={t:.6g}"
                break
    results.append(PropertyResult("rearr.equimeasurability", draws, viol, wit))

    rng = np.random.default_rng([seed, 11])
    viol, wit, draws = 0, "", 0
    for _ in range(n(30)):
        f = SampledFunction(rng.normal(size=25), rng.uniform(0.1, 1, 25))
        draws += 1
        for q in (1.0, 2.0, 3.5):
            lq = rearrangement.lorentz_norm(f, q, q, "star")
            direct = float(np.sum(f.weights * np.abs(f.values) ** q)) ** (1.0 / q)
            if abs(lq - direct) > 1e-10 * (1 + direct):
                viol += 1
                wit = f"q={q}: {lq} vs {direct}"
    results.append(PropertyResult("rearr.lorentz_qq_is_Lq", draws, viol, wit))

    rng = np.random.default_rng([seed, 12])
    viol, wit, cmax = 0, "", 0.0
    for _ in range(n(30)):
        f = SampledFunction(rng.normal(size=20), rng.uniform(0.1, 1, 20))
        s1 = rearrangement.lorentz_norm(f, 2.0, 1.0, "star")
        s2 = rearrangement.lorentz_norm(f, 2.0, 1.0, "star_star")
        if s1 > s2 * (1 + 1e-10):
            viol += 1
            wit = "star exceeded star_star"
        cmax = max(cmax, s2 / max(s1, 1e-300))
    results.append(PropertyResult("rearr.star_starstar_comparison", n(30), viol, wit,
                                  {"c(2,1)": cmax}))

    rng = np.random.default_rng([seed, 13])
    cs = []
    for _ in range(n(40)):
        m = int(rng.integers(5, 40))
        f = SampledFunction(rng.uniform(0, 3, m), rng.uniform(0.01, 1.0 / m, m) + 1.0 / m)
        lhs, rhs = rearrangement.hardy_prefix_ratio(f, 3)
        cs.append(lhs / max(rhs, 1e-300))
    cs = np.array(cs)
    viol = int(np.sum(~np.isfinite(cs)))
    results.append(PropertyResult("rearr.hardy_prefix_n3", cs.size, viol, "",
                                  {"c_max": float(cs.max()), "c_min": float(cs.min())}))

    rng = np.random.default_rng([seed, 14])
    viol, wit, draws = 0, "", 0
    for _ in range(n(1000)):
        m = int(rng.integers(2, 25))
        w = rng.uniform(0.05, 1, m)
        f = SampledFunction(rng.normal(size=m), w)
        g = SampledFunction(rng.normal(size=m), w)
        lhs, rhs = rearrangement.hardy_littlewood_check(f, g)
        draws += 1
        if lhs > rhs * (1 + 1e-12) + 1e-14:
            viol += 1
            wit = f"lhs={lhs} rhs={rhs}"
    results.append(PropertyResult("rearr.hardy_littlewood", draws, viol, wit))

    rng = np.random.default_rng([seed, 15])
    viol, wit, draws = 0, "", 0
    for _ in range(n(1000)):
        m = int(rng.integers(2, 30))
        w = rng.uniform(0.05, 1, m)
        f = SampledFunction(rng.normal(size=m), w)
        v = SampledFunction(rng.normal(size=m), w)
        phi = rearrangement.pseudo_rearrangement(f, v)
        fstar = decreasing_rearrangement(f)
        phistar = decreasing_rearrangement(SampledFunction(phi.values, np.diff(phi.edges)))
        spts = fstar.edges[1:]
        lhs = rearrangement.StepFunction(phistar.edges, phistar.values ** 2).prefix(spts)
        rhs = rearrangement.StepFunction(fstar.edges, fstar.values ** 2).prefix(spts)
        draws += 1
        if np.any(lhs > rhs * (1 + 1e-10) + 1e-12):
            viol += 1
            wit = f"m={m}"
    results.append(PropertyResult("rearr.pseudo_prefix_domination", draws, viol, wit))

    rng = np.random.default_rng([seed, 16])
    viol, wit, draws = 0, "", 0
    for _ in range(n(200)):
        m = int(rng.integers(2, 20))
        w = rng.uniform(0.05, 1, m)
        f = SampledFunction(rng.normal(size=m), w)
        g = SampledFunction(rng.normal(size=m), w)
        ssum = decreasing_rearrangement(f + g)
        sf, sg = decreasing_rearrangement(f), decreasing_rearrangement(g)
        spts = rng.uniform(1e-6, f.total_measure, 20)
        draws += spts.size
        bad = ssum.maximal(spts) > sf.maximal(spts) + sg.maximal(spts) + 1e-10
        if np.any(bad) and not wit:
            viol += int(bad.sum())
            wit = f"s={spts[np.argmax(bad)]:.4g}"
    results.append(PropertyResult("rearr.maximal_subadditive", draws, viol, wit))

    rng = np.random.default_rng([seed, 17])
    viol, wit = 0, ""
    for _ in range(n(40)):
        f = SampledFunction(rng.normal(size=12), rng.uniform(0.1, 1, 12))
        c = float(rng.uniform(0.1, 10))
        n1 = rearrangement.orlicz_luxemburg_norm(f.scaled(c), PowerYoung(2.5))
        n0 = rearrangement.orlicz_luxemburg_norm(f, PowerYoung(2.5))
        if abs(n1 - c * n0) > 1e-8 * (1 + n1):
            viol += 1
            wit = f"c={c}"
    results.append(PropertyResult("rearr.luxemburg_homogeneous", n(40), viol, wit))

    # --- geometry ----------------------------------------------------------
    doms = [("disk", geometry.DiskDomain(1.0)),
            ("ellipse", geometry.EllipseDomain(2.0, 1.0)),
            ("superellipse", geometry.SuperellipseDomain(1.0, 1.0, 4.0))]
    viol, wit = 0, ""
    for dname, dom in doms:
        res = abs(geometry.total_curvature(dom) - 2 * math.pi)
        if res > 1e-6:
            viol += 1
            wit = f"{dname}: residual {res:.2e}"
    results.append(PropertyResult("geom.gauss_bonnet", len(doms), viol, wit))

    rng = np.random.default_rng([seed, 18])
    viol, wit, draws = 0, "", 0
    for nname, nrm in _registered_norms():
        th = np.linspace(0, 2 * math.pi, 512, endpoint=False)
        nus = np.stack([np.cos(th), np.sin(th)], axis=-1)
        taus = np.stack([-np.sin(th), np.cos(th)], axis=-1)
        envelope = np.einsum("mij,mi,mj->m", nrm.hess_H(nus), taus, taus)
        c_lo, c_hi = float(envelope.min()), float(envelope.max())
        for dname, dom in doms:
            s = rng.uniform(0, dom.perimeter, n(200))
            draws += s.size
            kap = dom.curvature_arc(s)
            trh = geometry.anisotropic_mean_curvature(dom, nrm, s)
            bad = (trh < -1e-9) | (trh < kap * c_lo * (1 - 1e-6) - 1e-12) \
                | (trh > kap * c_hi * (1 + 1e-6) + 1e-12)
            if np.any(bad) and not wit:
                viol += int(bad.sum())
                wit = f"{nname}/{dname}"
    results.append(PropertyResult("geom.anisotropic_curvature_envelope", draws, viol, wit))

    viol, wit = 0, ""
    sq = geometry.PolygonDomain([[0, 0], [1, 0], [1, 1], [0, 1]])
    tri = geometry.PolygonDomain([[0, 0], [2, 0], [1, 1.5]])
    for dname, dom, h in (("square", sq, 0.2), ("triangle", tri, 0.2)):
        mesh = triangulate(dom, h)
        if abs(float(mesh.areas.sum()) - dom.area) > 1e-12:
            viol += 1
            wit = f"{dname}: area {mesh.areas.sum()} vs {dom.area}"
    results.append(PropertyResult("geom.polygon_mesh_area_exact", 2, viol, wit))

    viol, wit = 0, ""
    for dname, dom in doms:
        svals = np.geomspace(dom.area * 1e-6, dom.area * 0.5, 24)
        gv = np.array([geometry.g_function(dom, float(s)) for s in svals])
        if not (np.all(np.diff(gv) > 0) and gv[0] < 1e-2):
            viol += 1
            wit = f"{dname}: G not increasing from 0"
    results.append(PropertyResult("geom.G_increasing_from_zero", len(doms) * 24, viol, wit))

    rng = np.random.default_rng([seed, 19])
    viol, wit, draws = 0, "", 0
    disk = doms[0][1]
    for _ in range(n(10)):
        V = PolynomialField.random(rng, degree=2)
        W = PolynomialField.random(rng, degree=2)
        rep = norm_field.check_divergence_identity(V, W, disk, n_points=n(50),
                                                   seed=int(rng.integers(2 ** 31)))
        draws += 1
        if rep.pointwise_residual > 1e-10 or rep.integral_residual > 1e-8:
            viol += 1
            wit = (f"pointwise {rep.pointwise_residual:.2e}, "
                   f"integral {rep.integral_residual:.2e}")
    results.append(PropertyResult("geom.divergence_identities", draws, viol, wit))

    # --- solver ------------------------------------------------------------
    mesh = triangulate(geometry.DiskDomain(1.0), 0.25)
    prob = DiscreteProblem(mesh, "dirichlet", np.ones(mesh.n_triangles),
                           PowerYoung(3.0), norm_field.EuclideanNorm(2),
                           eps_schedule=(1e-1, 1e-3, 1e-5, 1e-6))
    sol = solve(prob)
    energies = [rec["energy"] for rec in sol.history]
    viol, wit = 0, ""
    by_eps: dict[float, list[float]] = {}
    for rec in sol.history:
        by_eps.setdefault(rec["eps"], []).append(rec["energy"])
    for eps, es in by_eps.items():
        if any(e2 > e1 + 1e-12 * (1 + abs(e1)) for e1, e2 in zip(es, es[1:])):
            viol += 1
            wit = f"eps={eps}: non-monotone energy"
    if sol.energy > 0.0:
        viol += 1
        wit = "final energy above J(0) = 0"
    results.append(PropertyResult("solver.energy_descent", len(energies), viol, wit))

    gs = [g for _, g in sol.eps_grad_sup]
    drift = abs(gs[-1] - gs[-2]) / gs[-1]
    results.append(PropertyResult("solver.continuation_settled", 1,
                                  0 if drift < 5e-3 else 1,
                                  "" if drift < 5e-3 else f"drift {drift:.2%}",
                                  {"last_two_drift": drift}))

    umin = float(sol.u.min())
    results.append(PropertyResult("solver.nonneg_for_nonneg_load", 1,
                                  0 if umin >= -1e-10 else 1,
                                  "" if umin >= -1e-10 else f"min u = {umin:.2e} "
                                  f"(mesh min angle {mesh.min_angle_deg:.1f} deg)"))

    rng = np.random.default_rng([seed, 20])
    x1 = rng.normal(size=mesh.n_vertices) * 0.1
    x2 = rng.normal(size=mesh.n_vertices) * 0.1
    s1 = solve(prob, x0=x1)
    s2 = solve(prob, x0=x2)
    dev = float(np.max(np.abs(s1.u - s2.u)))
    results.append(PropertyResult("solver.unique_minimizer", 2,
                                  0 if dev < 1e-8 else 1,
                                  "" if dev < 1e-8 else f"deviation {dev:.2e}",
                                  {"deviation": dev}))
    return results


def format_suite_report(results: list[PropertyResult]) -> str:
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        line = f"{status} {r.name} ({r.draws} draws"
        if r.violations:
            line += f", {r.violations} violations; witness: {r.witness}"
        line += ")"
        lines.append(line)
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} properties passed")
    return "\n".join(lines)
