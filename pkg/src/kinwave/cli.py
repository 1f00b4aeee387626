"""Command-line entry point.

Each run is described by a manifest: a flat INI file with ``[run]``,
``[kernel]``, ``[params]`` and ``[grid]`` sections.  Command-line arguments of
the form ``section.key=value`` override the file.  Results are CSV files whose
header lines carry the manifest hash, so identical manifests give identical
bytes.

    kinwave dispersion kernel.name=two_atom kernel.v_max=1 params.r=0.5
    kinwave simulate --config run.ini params.T=50
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import dispersion as ds
from . import kernels as kn
from . import simulator as sm
from . import spreading as sp
from . import stability as st
from . import waves as wv

FORMAT_VERSION = "1"
SUBCOMMANDS = ("dispersion", "wave", "simulate", "stability", "spread", "figures")
OUTPUT_ENV = "KINWAVE_OUTPUT"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3

KERNEL_FIELDS = {
    "uniform": ("v_max",),
    "two_atom": ("v_max",),
    "gaussian": ("sigma",),
    "cauchy": ("sigma",),
    "truncated_gaussian": ("sigma", "A"),
    "truncated_cauchy": ("sigma", "A"),
    "tabulated": ("path",),
    "atomic": ("velocities", "weights"),
}

# Defaults filled in before hashing, so the hash names the full computation.
DEFAULTS = {
    "dispersion": {"params": {"tol": 1e-12, "curve_points": 41}},
    "wave": {"params": {"offset": 0.1, "dz": 0.05, "tol": 1e-6}, "grid": {"nv": 64}},
    "simulate": {
        "params": {"T": 100.0, "output_interval": 1.0, "levels": "0.5", "datum": "step",
                   "scheme": "euler", "alpha": 1.0},
        "grid": {"x_lo": -20.0, "x_hi": 180.0, "nx": 4000, "nv": 64},
    },
    "stability": {
        "params": {"offset": 0.1, "dz": 0.05, "T": 20.0, "output_interval": 0.5, "center": 0.0,
                   "width": 2.0, "amplitude": 0.05, "gamma": 0.75, "samples": 10},
        "grid": {"nv": 64},
    },
    "spread": {
        "params": {"family": "gaussian", "sigma": 1.0, "r": 1.0, "A_list": "4 5 6 7 8 9 10 11 12",
                   "T": 300.0, "output_interval": 0.5, "datum": "step", "eps": 0.2,
                   "check_A": 6.0, "check_T": 3.0, "a": 1.0, "b": 1.0},
        "grid": {"nx": 8000, "nv": 64},
    },
    "figures": {
        "params": {"figure": "all", "sigma": 1.0, "r": 1.0, "A": 4.0, "A_list": "2 4 6 8",
                   "T": 40.0, "alpha": 1.0, "snapshot_interval": 5.0, "output_interval": 0.5},
        "grid": {"nx": 4000, "nv": 64},
    },
}


class ValidationError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class InvariantFailure(RuntimeError):
    pass


# ------------------------------------------------------------------ manifest

def _coerce(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _render(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class ExperimentManifest:
    subcommand: str
    kernel: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    output: str = "."
    version: str = FORMAT_VERSION

    def serialize(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["run"] = {"subcommand": self.subcommand, "output": self.output, "version": self.version}
        for name in ("kernel", "params", "grid"):
            cp[name] = {k: _render(v) for k, v in sorted(getattr(self, name).items())}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def parse(cls, text: str) -> "ExperimentManifest":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp.read_string(text)
        run = cp["run"] if cp.has_section("run") else {}
        sections = {n: {k: _coerce(v) for k, v in cp[n].items()} if cp.has_section(n) else {}
                    for n in ("kernel", "params", "grid")}
        return cls(str(run.get("subcommand", "")), output=str(run.get("output", ".")),
                   version=str(run.get("version", FORMAT_VERSION)), **sections)

    @property
    def digest(self) -> str:
        """sha256 of the manifest without its output location."""
        clone = ExperimentManifest(self.subcommand, self.kernel, self.params, self.grid, "", self.version)
        return hashlib.sha256(clone.serialize().encode()).hexdigest()

    def with_defaults(self) -> "ExperimentManifest":
        d = DEFAULTS.get(self.subcommand, {})
        return ExperimentManifest(
            self.subcommand, dict(self.kernel), {**d.get("params", {}), **self.params},
            {**d.get("grid", {}), **self.grid}, self.output, self.version)

    def apply(self, overrides) -> None:
        for item in overrides:
            key, sep, value = item.partition("=")
            section, dot, name = key.partition(".")
            if not sep or not dot or not name:
                raise ValidationError([f"override {item!r} is not of the form section.key=value"])
            if section == "run":
                if name not in ("subcommand", "output", "version"):
                    raise ValidationError([f"unknown run field {name!r}"])
                setattr(self, name, value)
            elif section in ("kernel", "params", "grid"):
                getattr(self, section)[name] = _coerce(value)
            else:
                raise ValidationError([f"unknown manifest section {section!r}"])


def _num(section: dict, key: str, where: str, problems: list, positive=False, integer=False,
         required=True):
    if key not in section:
        if required:
            problems.append(f"{where}.{key}: missing")
        return None
    val = section[key]
    if isinstance(val, str) or (integer and not isinstance(val, int)) or not math.isfinite(val):
        problems.append(f"{where}.{key}: expected {'an integer' if integer else 'a number'}, got {val!r}")
        return None
    if positive and not val > 0:
        problems.append(f"{where}.{key}: must be positive, got {val!r}")
        return None
    return val


def _floats(text, where: str, problems: list) -> list:
    try:
        return [float(x) for x in str(text).replace(",", " ").split()]
    except ValueError:
        problems.append(f"{where}: expected a list of numbers, got {text!r}")
        return []


def _validate_kernel(k: dict, problems: list):
    name = k.get("name")
    if name is None:
        problems.append("kernel.name: missing")
        return None
    if name not in KERNEL_FIELDS:
        problems.append(f"kernel.name: unknown kernel {name!r} (choose from {', '.join(KERNEL_FIELDS)})")
        return None
    ok = True
    for f in KERNEL_FIELDS[name]:
        if f not in k:
            problems.append(f"kernel.{f}: missing (required by kernel {name!r})")
            ok = False
        elif f in ("v_max", "sigma", "A") and _num(k, f, "kernel", problems, positive=True) is None:
            ok = False
    if name == "tabulated" and "path" in k and not Path(str(k["path"])).is_file():
        problems.append(f"kernel.path: no such file {k['path']!r}")
        ok = False
    if name == "atomic" and ok:
        v = _floats(k["velocities"], "kernel.velocities", problems)
        w = _floats(k["weights"], "kernel.weights", problems)
        if len(v) != len(w) or not v:
            problems.append("kernel.weights: must match kernel.velocities in length")
            ok = False
        elif any(x <= 0 for x in w):
            problems.append("kernel.weights: must be positive")
            ok = False
    if "nodes" in k:
        ok = _num(k, "nodes", "kernel", problems, positive=True, integer=True) is not None and ok
    if not ok:
        return None
    try:
        return kn.make_kernel(k)
    except (kn.KernelError, KeyError, ValueError, OSError) as exc:
        problems.append(f"kernel: {exc}")
        return None


def validate(m: ExperimentManifest) -> dict:
    """Check every precondition; raise with all violations at once."""
    problems = []
    if m.subcommand not in SUBCOMMANDS:
        problems.append(f"run.subcommand: expected one of {', '.join(SUBCOMMANDS)}, got {m.subcommand!r}")
        raise ValidationError(problems)
    if m.version != FORMAT_VERSION:
        problems.append(f"run.version: unsupported format {m.version!r}")
    p, g = m.params, m.grid
    ctx = {}
    if m.subcommand in ("dispersion", "wave", "simulate", "stability"):
        kernel = _validate_kernel(m.kernel, problems)
        r = _num(p, "r", "params", problems, positive=True)
        ctx.update(kernel=kernel, r=r)
        if kernel is not None and kernel.kind == "continuous" and not kernel.bounded:
            problems.append(f"kernel.name: {kernel.name} has unbounded support, so there is no "
                            "minimal speed; use a truncated kernel or the spread subcommand")
        if m.subcommand in ("wave", "stability"):
            off = _num(p, "offset", "params", problems, positive=True)
            if off is not None and "c" not in p and off >= 1:
                problems.append("params.offset: must lie in (0, 1)")
            if "c" in p:
                _num(p, "c", "params", problems)
            _num(p, "dz", "params", problems, positive=True)
            _num(g, "nv", "grid", problems, positive=True, integer=True)
        if m.subcommand == "stability":
            _num(p, "T", "params", problems, positive=True)
            _num(p, "output_interval", "params", problems, positive=True)
            _num(p, "width", "params", problems, positive=True)
            _num(p, "amplitude", "params", problems, positive=True)
            _num(p, "center", "params", problems)
            gam = _num(p, "gamma", "params", problems)
            if gam is not None and not 0.5 < gam <= 1.0:
                problems.append("params.gamma: must lie in (1/2, 1]")
            _num(p, "samples", "params", problems, positive=True, integer=True)
        if m.subcommand == "simulate":
            _num(p, "T", "params", problems, positive=True)
            _num(p, "output_interval", "params", problems, positive=True)
            lo, hi = _num(g, "x_lo", "grid", problems), _num(g, "x_hi", "grid", problems)
            if lo is not None and hi is not None and not lo < hi:
                problems.append("grid.x_hi: must exceed grid.x_lo")
            nx = _num(g, "nx", "grid", problems, positive=True, integer=True)
            if nx is not None and nx < 10:
                problems.append("grid.nx: need at least 10 cells")
            _num(g, "nv", "grid", problems, positive=True, integer=True)
            levels = _floats(p.get("levels", ""), "params.levels", problems)
            if not levels or any(not 0 < lv < 1 for lv in levels):
                problems.append("params.levels: front levels must lie in (0, 1)")
            if p.get("datum") not in ("step", "parabolic"):
                problems.append(f"params.datum: expected step or parabolic, got {p.get('datum')!r}")
            if p.get("scheme") not in ("euler", "duhamel"):
                problems.append(f"params.scheme: expected euler or duhamel, got {p.get('scheme')!r}")
    elif m.subcommand in ("spread", "figures"):
        fam = p.get("family", "gaussian")
        if fam not in ("gaussian", "cauchy"):
            problems.append(f"params.family: expected gaussian or cauchy, got {fam!r}")
        sigma = _num(p, "sigma", "params", problems, positive=True)
        r = _num(p, "r", "params", problems, positive=True)
        T = _num(p, "T", "params", problems, positive=True)
        _num(p, "output_interval", "params", problems, positive=True)
        _num(g, "nx", "grid", problems, positive=True, integer=True)
        _num(g, "nv", "grid", problems, positive=True, integer=True)
        A_list = _floats(p.get("A_list", ""), "params.A_list", problems)
        if m.subcommand == "figures":
            A_list = A_list + [a for a in [_num(p, "A", "params", problems, positive=True)] if a]
            if p.get("figure") not in ("fig1", "fig2", "fig3", "all"):
                problems.append(f"params.figure: expected fig1, fig2, fig3 or all, got {p.get('figure')!r}")
        if sigma is not None and r is not None and fam in ("gaussian", "cauchy"):
            floor = kn.truncation_threshold(sp.base_kernel(fam, sigma), r)
            for A in A_list:
                if not A > floor:
                    problems.append(f"params.A_list: truncation A={A} must exceed {floor:.6g}")
            if m.subcommand == "spread":
                cA = _num(p, "check_A", "params", problems, positive=True)
                if cA is not None and not cA > floor:
                    problems.append(f"params.check_A: truncation must exceed {floor:.6g}")
                _num(p, "check_T", "params", problems, positive=True)
                _num(p, "eps", "params", problems, positive=True)
                a, b = _num(p, "a", "params", problems), _num(p, "b", "params", problems)
                if a is not None and b is not None and fam in ("gaussian", "cauchy"):
                    try:
                        sp.envelope(fam, sigma, r, a, b)
                    except sp.SpreadingError as exc:
                        problems.append(f"params.a/params.b: {exc}")
                if fam == "cauchy" and T is not None and T > 3.0 / r:
                    problems.append(f"params.T: Cauchy runs are limited to T <= 3/r = {3.0 / r:.6g}")
                if p.get("datum") not in ("step", "parabolic"):
                    problems.append(f"params.datum: expected step or parabolic, got {p.get('datum')!r}")
        if len(A_list) < (3 if m.subcommand == "spread" else 1):
            problems.append("params.A_list: need at least three truncations for a power-law fit"
                            if m.subcommand == "spread" else "params.A_list: empty")
    if problems:
        raise ValidationError(problems)
    return ctx


# -------------------------------------------------------------------- output

def output_root(m: ExperimentManifest) -> Path:
    root = Path(os.environ.get(OUTPUT_ENV, "."))
    return root / m.output


def write_table(path: Path, m: ExperimentManifest, columns, rows, note: str = "") -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(f"# kinwave {__version__} format {m.version}\n")
    buf.write(f"# manifest sha256 {m.digest}\n")
    buf.write(f"# subcommand {m.subcommand}\n")
    if note:
        buf.write(f"# {note}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    path.write_text(buf.getvalue())
    return path


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _tag(A: float) -> str:
    return f"{A:g}".replace(".", "p")


# ---------------------------------------------------------------- subcommands

def _wave_speed(problem, params) -> float:
    if "c" in params:
        return float(params["c"])
    c_star = ds.minimal_speed(problem).c
    return c_star + params["offset"] * (problem.v_max - c_star)


def run_dispersion(m, ctx, out: Path, log) -> int:
    p = m.params
    problem = ds.DispersionProblem(ctx["r"], ctx["kernel"])
    root = ds.minimal_speed(problem, tol=p["tol"])
    write_table(out / "dispersion_summary.csv", m, ["r", "c_star", "lambda_star", "kind", "edge"],
                [[ctx["r"], root.c, root.lam, root.kind, root.edge]])
    rows = []
    if math.isfinite(root.lam):
        for lam in np.linspace(0.1, 3.0, int(p["curve_points"])) * root.lam:
            rows.append([lam, ds.speed_for_decay(problem, lam)])
    write_table(out / "speed_curve.csv", m, ["lambda", "c"], rows)
    log(f"c* = {root.c:.12g}  lambda* = {root.lam:.12g}  ({root.kind})")
    return EXIT_OK


def run_wave(m, ctx, out: Path, log) -> int:
    p = m.params
    problem = ds.DispersionProblem(ctx["r"], ctx["kernel"])
    c = _wave_speed(problem, p)
    grid = wv.default_grid(problem, c, nv=m.grid["nv"], dz=p["dz"])
    prof = wv.construct_wave(problem, c, grid, tol=p["tol"])
    q = prof.q
    write_table(out / "wave.csv", m, ["z", "rho", "rho_upper", "rho_lower"],
                zip(prof.z, prof.rho, q @ prof.upper, q @ prof.lower))
    d = prof.diagnostics
    write_table(out / "wave_summary.csv", m, ["c", "lambda", "tail_decay", *sorted(d)],
                [[c, prof.lam, prof.tail_decay(), *(d[k] for k in sorted(d))]])
    log(f"wave at c = {c:.10g}: decay {prof.tail_decay():.6g} (lambda {prof.lam:.6g}), "
        f"residual {d['residual_sup']:.3g}")
    if d["upper_violation"] > 0 or d["lower_violation"] > 0:
        raise InvariantFailure("wave left the barrier sandwich")
    return EXIT_OK


def run_simulate(m, ctx, out: Path, log) -> int:
    p, g = m.params, m.grid
    grid = sm.Grid(float(g["x_lo"]), float(g["x_hi"]), int(g["nx"]), int(g["nv"]))
    datum = {"kind": p["datum"], "alpha": p["alpha"]}
    state = sm.init_state(ctx["kernel"], ctx["r"], grid, datum)
    levels = tuple(float(x) for x in str(p["levels"]).split())
    state, trace = sm.evolve(state, float(p["T"]), float(p["output_interval"]), levels, scheme=p["scheme"])
    write_table(out / "front.csv", m, ["t", *(f"x_{lv:g}" for lv in levels)],
                zip(trace.times, *(trace.positions[lv] for lv in levels)))
    write_table(out / "final_rho.csv", m, ["x", "rho"], zip(state.x, state.rho))
    rows = [[lv, trace.speed(lv)] for lv in levels]
    try:
        c_star = ds.minimal_speed(ds.DispersionProblem(ctx["r"], ctx["kernel"])).c
    except (ds.DomainError, ds.NoRootError):
        c_star = math.nan
    write_table(out / "speed.csv", m, ["level", "speed", "c_star"], [row + [c_star] for row in rows])
    log(f"front speed {rows[0][1]:.6g} at level {levels[0]:g} (c* = {c_star:.6g})")
    if np.any(state.g < -1e-12) or np.any(state.g > state.M[:, None] * (1 + 1e-12)):
        raise InvariantFailure("solution left the invariant range 0 <= g <= M")
    return EXIT_OK


def run_stability(m, ctx, out: Path, log) -> int:
    p = m.params
    problem = ds.DispersionProblem(ctx["r"], ctx["kernel"])
    c = _wave_speed(problem, p)
    prof = wv.construct_wave(problem, c, wv.default_grid(problem, c, nv=m.grid["nv"], dz=p["dz"]))
    weight = st.compute_weight(prof)
    u0 = st.bump(prof, p["center"], p["width"], p["amplitude"])
    lin = st.lyapunov_monitor(prof, weight, u0, p["T"], p["output_interval"])
    wn = st.compute_weight(prof, weight.Lam, gamma=p["gamma"])
    # keep f + u between gamma f and M
    u_nl = -(1.0 - p["gamma"]) * prof.f * (np.abs(prof.z - p["center"]) < p["width"])[None, :]
    non = st.lyapunov_monitor(prof, wn, u_nl, p["T"], p["output_interval"], "nonlinear", p["gamma"])
    rows = [[t, e, "linear"] for t, e in zip(lin.times, lin.energy)]
    rows += [[t, e, "nonlinear"] for t, e in zip(non.times, non.energy)]
    write_table(out / "energy.csv", m, ["t", "energy", "mode"], rows)
    idx = np.linspace(0, prof.z.size - 1, int(p["samples"]) + 2).astype(int)[1:-1]
    eig = [st.eigen_check(prof, weight, i) for i in idx]
    write_table(out / "eigen.csv", m, ["z", "max_eigenvalue", "null_residual"],
                [[e.z, e.max_eigenvalue, e.null_residual] for e in eig])
    worst = max(float(lin.excess.max()), float(non.excess.max()))
    log(f"energy excess {worst:.3g}; max eigenvalue {max(e.max_eigenvalue for e in eig):.3g}")
    if not (lin.ok and non.ok):
        raise InvariantFailure(f"weighted energy increased beyond the slack ({worst:.3g})")
    if max(e.max_eigenvalue for e in eig) > 1e-6:
        raise InvariantFailure("symmetrized operator has a positive eigenvalue")
    return EXIT_OK


def run_spread(m, ctx, out: Path, log) -> int:
    p, g = m.params, m.grid
    fam, sigma, r, T = p["family"], float(p["sigma"]), float(p["r"]), float(p["T"])
    A_list = sorted(float(a) for a in str(p["A_list"]).replace(",", " ").split())
    sweep = sp.truncation_sweep(r, sigma, A_list, fam)
    write_table(out / "truncation_sweep.csv", m, ["A", "r_A", "c_star", "lambda_star", "edge"],
                [[e.A, e.r_A, e.c_star, e.lam, e.edge] for e in sweep.entries])
    datum = {"kind": p["datum"], "alpha": p.get("alpha", 1.0)}
    runs = []
    for A in A_list:
        run = sp.accelerating_run(sigma, r, A, T, datum, nx=int(g["nx"]), nv=int(g["nv"]),
                                  output_interval=float(p["output_interval"]), eps=p["eps"], family=fam)
        runs.append(run)
        t, x = run.positions()
        _, xh = run.positions(0.5)
        write_table(out / f"front_A{_tag(A)}.csv", m, ["t", f"x_{sp.FRONT_LEVEL:g}", "x_0.5"], zip(t, x, xh),
                    note=f"A={A:g} c_star={run.c_star!r} late_slope={run.late_slope()!r}")
        log(f"A = {A:g}: late slope {run.late_slope():.6g} vs c*_A {run.c_star:.6g}")
    expo, pref, resid = sp.fit_power_law(runs)
    t = runs[0].positions()[0]
    env_x = np.max([np.interp(t, *r_.positions()) for r_ in runs], axis=0)
    env = sp.envelope(fam, sigma, r, p["a"], p["b"])
    write_table(out / "envelope.csv", m, ["t", "envelope_front", "envelope_level_set"],
                [[ti, xi, sp.leading_level_set(env, ti)] for ti, xi in zip(t, env_x)])
    write_table(out / "fit.csv", m, ["exponent", "prefactor", "residual"], [[expo, pref, resid]])
    rep = sp.envelope_check(env, float(p["check_A"]), float(p["check_T"]), eps=p["eps"])
    write_table(out / "violations.csv", m, ["t", "max_violation", "max_beyond_level_set"],
                zip(rep.times, rep.max_violation, rep.beyond_max))
    log(f"envelope exponent {expo:.4f} (residual {resid:.3g}); envelope violation {rep.worst:.3g}")
    if not rep.ok():
        raise InvariantFailure(f"density exceeded the envelope by {rep.worst:.3g}")
    return EXIT_OK


def run_figures(m, ctx, out: Path, log) -> int:
    p, g = m.params, m.grid
    which = ("fig1", "fig2", "fig3") if p["figure"] == "all" else (p["figure"],)
    sigma, r, T = float(p["sigma"]), float(p["r"]), float(p["T"])
    nx, nv = int(g["nx"]), int(g["nv"])
    if "fig1" in which:
        kA, rA = kn.truncate_renormalize(kn.gaussian(sigma, nv), float(p["A"]), r)
        c_star = ds.minimal_speed(ds.DispersionProblem(rA, kA.with_nodes(kn.DEFAULT_NODES))).c
        grid = sm.Grid(-20.0, 1.1 * c_star * T + 20.0, nx, nv)
        state = sm.init_state(kA, rA, grid, {"kind": "parabolic", "alpha": p["alpha"]})
        rows = [[0.0, x, rho] for x, rho in zip(state.x, state.rho)]
        interval = float(p["snapshot_interval"])
        for k in range(int(math.ceil(T / interval - 1e-9))):
            state, _ = sm.evolve(state, interval, interval)
            rows += [[state.t, x, rho] for x, rho in zip(state.x, state.rho)]
        write_table(out / "fig1_snapshots.csv", m, ["t", "x", "rho"], rows, note=f"c_star={c_star!r}")
        log(f"fig1: {len(rows) // nx} snapshots")
    if "fig2" in which or "fig3" in which:
        A_list = sorted(float(a) for a in str(p["A_list"]).replace(",", " ").split())
        runs = [sp.accelerating_run(sigma, r, A, T, "step", nx=nx, nv=nv,
                                    output_interval=float(p["output_interval"])) for A in A_list]
        if "fig2" in which:
            rows = []
            for run in runs:
                t, x = run.positions()
                speed = np.gradient(x, t)
                rows += [[run.A, ti, si, math.sqrt(ti)] for ti, si in zip(t, speed)]
            write_table(out / "fig2_speeds.csv", m, ["A", "t", "speed", "sqrt_t"], rows)
            log(f"fig2: {len(runs)} speed curves")
        if "fig3" in which:
            rows = []
            for run in runs:
                shift = sm.front_position(run.rho, run.x, 0.5)
                rows += [[run.A, x - shift, rho] for x, rho in zip(run.x, run.rho)]
            write_table(out / "fig3_profiles.csv", m, ["A", "z", "rho"], rows,
                        note="profiles translated so that rho = 1/2 at z = 0")
            log(f"fig3: {len(runs)} translated profiles")
    return EXIT_OK


RUNNERS = {
    "dispersion": run_dispersion,
    "wave": run_wave,
    "simulate": run_simulate,
    "stability": run_stability,
    "spread": run_spread,
    "figures": run_figures,
}


def run(m: ExperimentManifest, log=print) -> int:
    """Validate, dispatch and write outputs; returns the process exit code."""
    m = m.with_defaults()
    try:
        ctx = validate(m)
    except ValidationError as exc:
        for problem in exc.problems:
            log(f"invalid: {problem}")
        return EXIT_VALIDATION
    out = output_root(m)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.ini").write_text(m.serialize())
    try:
        code = RUNNERS[m.subcommand](m, ctx, out, log)
    except (InvariantFailure, wv.WaveError, sm.SimulationError, st.StabilityError,
            sp.SpreadingError, ds.NoRootError) as exc:
        log(f"numeric failure: {exc}")
        return EXIT_NUMERIC
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kinwave", description="Kinetic reaction-transport fronts.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="manifest file (INI)")
        s.add_argument("--output", help="output directory below $KINWAVE_OUTPUT")
        s.add_argument("--kernel", help="kernel name, shorthand for kernel.name=...")
        s.add_argument("--r", help="growth rate, shorthand for params.r=...")
        s.add_argument("overrides", nargs="*", help="section.key=value")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, rest = parser.parse_known_args(argv)
    # Overrides may follow flags, which argparse leaves unparsed.
    stray = [a for a in rest if "=" not in a or a.startswith("-")]
    if stray:
        parser.error(f"unrecognized arguments: {' '.join(stray)}")
    args.overrides = list(args.overrides) + rest
    try:
        if args.config:
            m = ExperimentManifest.parse(Path(args.config).read_text())
            if m.subcommand and m.subcommand != args.subcommand:
                raise ValidationError([f"run.subcommand: manifest is for {m.subcommand!r}"])
            m.subcommand = args.subcommand
        else:
            m = ExperimentManifest(args.subcommand, output=args.subcommand)
        extra = list(args.overrides)
        if args.kernel:
            extra.append(f"kernel.name={args.kernel}")
        if args.r:
            extra.append(f"params.r={args.r}")
        if args.output:
            extra.append(f"run.output={args.output}")
        m.apply(extra)
    except (ValidationError, OSError, configparser.Error) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return run(m)


if __name__ == "__main__":
    sys.exit(main())
