"""Command-line harness: ``qpflow verify | flow | leaf | rs``.

Exit codes: 0 success, 1 suite failure or numerical failure (partial output flushed),
2 configuration error.  Output is deterministic for a fixed configuration and seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bivector as bv
from . import dynamics as dyn
from . import forms
from . import integrals as it
from . import matlie
from . import phasespace as ps
from . import spinrs as sr

SUITES = ("bracket", "jacobi", "moment", "forms", "pencil", "psi", "flows", "integrals", "spinrs")

DEFAULT_TOL = {
    "bracket": 1e-7,  # includes a finite-difference gradient check
    "jacobi": 1e-6,
    "moment": 1e-8,
    "forms": 1e-6,
    "pencil": 1e-6,
    "psi": 1e-9,
    "flows": 1e-9,
    "integrals": 1e-9,
    "spinrs": 1e-8,
}


class ConfigError(ValueError):
    """Invalid command-line configuration (exit code 2)."""


@dataclass
class RunConfig:
    n: int = 2
    d: int = 2
    x: tuple = ()
    z: tuple | None = ()
    seed: int = 0
    tol: float | None = None
    cases: int = 10
    suite: str = "all"
    T: float = 1.0
    dt: float = 1e-3
    gamma: float = 1.1
    paths: dict = field(default_factory=dict)

    def validate(self):
        if self.n < 1 or self.d < 1:
            raise ConfigError("need n >= 1 and d >= 1")
        if not self.x:
            self.x = tuple(1.0 if a % 2 == 0 else -1.0 for a in range(self.d))
        if len(self.x) != self.d:
            raise ConfigError(f"--x needs {self.d} values, got {len(self.x)}")
        if any(t == 0 for t in self.x):
            raise ConfigError("ball parameters x must be nonzero")
        if self.z is not None:
            npair = self.d * (self.d - 1) // 2
            if len(self.z) not in (0, npair):
                raise ConfigError(f"--z needs {npair} values for d={self.d}")
        if not (self.dt > 0 and self.T > 0):
            raise ConfigError("need dt > 0 and T > 0")
        if self.cases < 1:
            raise ConfigError("need cases >= 1")
        if self.suite != "all" and self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}")
        return self

    def pencil(self, rng):
        if self.z is None:
            return ps.PencilParams.random(self.d, rng)
        return ps.PencilParams(self.d, self.z)


def _floats(text):
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def _workers(cases):
    cap = os.environ.get("QPFLOW_THREADS")
    cap = int(cap) if cap and cap.isdigit() and int(cap) > 0 else (os.cpu_count() or 1)
    return max(1, min(cap, cases))


# ---------------------------------------------------------------------------
# verification suites: each case returns its max residual


def _case_bracket(cfg, rng):
    m = ps.random_point(cfg.n, cfg.d, cfg.x, rng)
    kind = bv.BivectorKind.standard(cfg.pencil(rng))
    P = bv.assemble_P(m, kind)
    res = float(np.max(np.abs(P + P.T)))
    res = max(res, bv.tables_consistency(m, kind))
    f = bv.I_obs(int(rng.integers(0, 3)), int(rng.integers(cfg.d)), int(rng.integers(cfg.d)))
    return max(res, bv.fd_gradient_check(f, m))


def _case_jacobi(cfg, rng):
    m = ps.random_point(cfg.n, cfg.d, cfg.x, rng)
    kind = bv.BivectorKind.standard(cfg.pencil(rng))
    gens = bv.generator_catalog(cfg.n, cfg.d)
    f1, f2, f3 = (gens[j] for j in rng.choice(len(gens), 3, replace=False))
    return bv.quasi_jacobi_residual(f1, f2, f3, m, kind, relative=True)


def _case_moment(cfg, rng):
    m = ps.random_point(cfg.n, cfg.d, cfg.x, rng)
    z = cfg.pencil(rng)
    return max(
        bv.momentmap_residual(m, bv.BivectorKind.standard(z)),
        bv.momentmap_residual(m, bv.BivectorKind.degenerate(z)),
    )


def _case_forms(cfg, rng):
    m = ps.random_point(cfg.n, cfg.d, cfg.x, rng)
    z = cfg.pencil(rng)
    return max(forms.compat_operator_residual(m, z), forms.b2_residual(m, z))


def _invariant_pool(d):
    pool = [bv.tr_power(1), bv.tr_power(2)]
    pool += [bv.I_obs(k, a, b) for k in range(2) for a in range(d) for b in range(d)]
    return pool


def _case_pencil(cfg, rng):
    m = ps.random_point(cfg.n, cfg.d, cfg.x, rng)
    z1, z2 = cfg.pencil(rng), ps.PencilParams.random(cfg.d, rng)
    res = bv.pencil_affinity_residual(m, z1, z2)
    pool = _invariant_pool(cfg.d)
    f1, f2, f3 = (pool[j] for j in rng.choice(len(pool), 3, replace=False))
    terms = bv.jacobiator_terms(f1, f2, f3, m, bv.BivectorKind.standard(z1))
    return max(res, abs(terms.sum()) / max(1.0, float(np.max(np.abs(terms)))))


def _case_psi(cfg, rng):
    m = ps.random_point(cfg.n, cfg.d, cfg.x, rng)
    z = cfg.pencil(rng)
    pm = ps.psi_map(m)
    gens = bv.generator_catalog(cfg.n, cfg.d)
    G = np.array([g.gradient(pm) for g in gens])
    Gp = np.array([bv.psi_pullback(g).gradient(m) for g in gens])
    lhs = Gp @ bv.assemble_P(m, bv.BivectorKind.standard(z)) @ Gp.T
    rhs = G @ bv.assemble_P(pm, bv.BivectorKind.degenerate(z)) @ G.T
    return float(np.max(np.abs(lhs - rhs)))


def _case_flows(cfg, rng):
    m = ps.random_point(cfg.n, cfg.d, cfg.x, rng)
    h1 = matlie.ClassFnSpec.re_tr(1) + matlie.ClassFnSpec.im_tr(2, 0.5)
    h2 = matlie.ClassFnSpec.re_tr(2, 0.3)
    fr = dyn.integrate_master(h1, m, np.linspace(0.0, 10.0, 6), dyn.trace_words(cfg.d, 2))
    res = max(fr.max_drift("phi_drift"), fr.max_drift("psi_drift"), fr.max_drift("word_drift"))
    res = max(res, dyn.commuting_flows_residual(h1, h2, m, 0.7, -1.3))
    s, _ = dyn.gauge_fix(m)
    return max(res, dyn.reduced_vs_hamiltonian_residual(h1, s))


def _case_integrals(cfg, rng):
    m = ps.random_point(cfg.n, cfg.d, cfg.x, rng)
    return it.sweep_residual(m, cfg.pencil(rng), kmax=2)


def _case_spinrs(cfg, rng):
    spec = sr.LeafSpec(cfg.gamma, cfg.n, cfg.d, cfg.x)
    m = sr.build_leaf_point(spec, rng)
    res = max(sr.leaf_residual(m, cfg.gamma), sr.det_constraint_residual(m, cfg.gamma))
    if cfg.d == 1:
        return max(res, abs(m.radii2()[0] - sr.d1_radius2(cfg.gamma, cfg.n, cfg.x[0])))
    s, _ = dyn.gauge_fix(m)
    sd = sr.spin_data(s, cfg.gamma, check=False)
    res = max(res, sd.telescoping, sd.reconstruction)
    res = max(res, sr.kz_combination_residual(s, cfg.gamma))
    res = max(res, sr.eom_vs_reduced_residual(s, cfg.gamma, "re"), sr.eom_vs_reduced_residual(s, cfg.gamma, "im"))
    return res


CASES = {name: globals()[f"_case_{name}"] for name in SUITES}


def run_suite(cfg, name):
    """Run ``cfg.cases`` cases of one suite; returns the report dict."""
    sid = SUITES.index(name)

    def one(i):
        rng = np.random.default_rng([cfg.seed, sid, i])
        return float(CASES[name](cfg, rng))

    with ThreadPoolExecutor(max_workers=_workers(cfg.cases)) as ex:
        residuals = list(ex.map(one, range(cfg.cases)))
    tol = DEFAULT_TOL[name] if cfg.tol is None else cfg.tol
    worst = max(residuals)
    return {
        "suite": name,
        "cases": cfg.cases,
        "max_residual": worst,
        "tolerance": tol,
        "pass": bool(worst <= tol),
        "seed": cfg.seed,
    }


def cmd_verify(cfg, out):
    names = SUITES if cfg.suite == "all" else (cfg.suite,)
    reports = [run_suite(cfg, nm) for nm in names]
    out.write(json.dumps(reports, indent=1) + "\n")
    return 0 if all(r["pass"] for r in reports) else 1


# ---------------------------------------------------------------------------
# trajectories


def _fmt(v):
    return repr(float(v))


def _write_csv(path, header, rows, truncated, message):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    if truncated:
        w.writerow(["TRUNCATED", message] + [""] * (len(header) - 2))
    text = buf.getvalue()
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load_point(path):
    with open(path) as fh:
        data = json.load(fh)
    return ps.MPoint.from_dict(data), data


def _initial_point(cfg):
    if cfg.paths.get("point"):
        return _load_point(cfg.paths["point"])[0]
    return ps.random_point(cfg.n, cfg.d, cfg.x, cfg.seed)


def cmd_flow(cfg, h, reduced=False):
    m0 = _initial_point(cfg)
    nsteps = int(round(cfg.T / cfg.dt))
    if not reduced:
        times = np.linspace(0.0, nsteps * cfg.dt, nsteps + 1)
        fr = dyn.integrate_master(h, m0, times, dyn.trace_words(m0.d, 2))
        header = ["t"] + [f"argB_{j + 1}" for j in range(m0.n)] + ["phi_drift", "psi_drift", "word_drift", "unitarity"]
        rows = []
        for k, (t, m) in enumerate(zip(fr.times, fr.points)):
            rows.append(
                [t, *np.sort(np.angle(np.linalg.eigvals(m.B)))]
                + [fr.log[c][k] for c in ("phi_drift", "psi_drift", "word_drift", "unitarity")]
            )
        _write_csv(cfg.paths.get("out"), header, rows, False, "")
        return 0
    s0, _ = dyn.gauge_fix(m0)
    fr = dyn.integrate_reduced(h, s0, cfg.T, cfg.dt)
    header = ["t"] + [f"q_{j + 1}" for j in range(s0.n)] + ["offdiag", "spectrum_drift", "unitarity", "endpoint_error"]
    rows = []
    for k, (t, s) in enumerate(zip(fr.times, fr.points)):
        exact, _ = dyn.gauge_fix(dyn.master_flow(h, m0, t))
        err = dyn.slice_distance(exact, s)
        rows.append([t, *s.q] + [fr.log[c][k] for c in ("offdiag", "spectrum_drift", "unitarity")] + [err])
    _write_csv(cfg.paths.get("out"), header, rows, fr.truncated, fr.message)
    return 1 if fr.truncated else 0


def cmd_leaf(cfg):
    spec = sr.LeafSpec(cfg.gamma, cfg.n, cfg.d, cfg.x)
    rng = np.random.default_rng(cfg.seed)
    m = sr.build_leaf_point(spec, rng)
    meta = {
        "gamma": cfg.gamma,
        "seed": cfg.seed,
        "leaf_residual": sr.leaf_residual(m, cfg.gamma),
        "det_residual": sr.det_constraint_residual(m, cfg.gamma),
    }
    text = m.to_json(**meta) + "\n"
    path = cfg.paths.get("out")
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
    return 0


def cmd_rs(cfg, every=1):
    m, data = _load_point(cfg.paths["point"])
    if "gamma" not in data:
        raise ConfigError("point file has no gamma")
    gamma = float(data["gamma"])
    sr.LeafSpec(gamma, m.n, m.d, tuple(m.x))
    s0, _ = dyn.gauge_fix(m)
    fr = sr.integrate_rs(s0, gamma, cfg.T, cfg.dt, record_every=every)
    n = s0.n
    header = ["t"] + [f"q_{j + 1}" for j in range(n)]
    header += [f"ReF_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    header += [f"ImF_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    header += ["constraint_drift"]
    rows = []
    for k, (t, s) in enumerate(zip(fr.times, fr.points)):
        F = sr.spin_data(s, gamma, check=False).F
        rows.append([t, *s.q, *F.real.ravel(), *F.imag.ravel(), fr.log["leaf"][k]])
    _write_csv(cfg.paths.get("out"), header, rows, fr.truncated, fr.message)
    return 1 if fr.truncated else 0


# ---------------------------------------------------------------------------
# argument parsing


def _parser():
    p = argparse.ArgumentParser(prog="qpflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--n", type=int, default=2)
        sp.add_argument("--d", type=int, default=2)
        sp.add_argument("--x", type=str, default="", help="comma-separated nonzero ball parameters")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=str, default=None, help="output file (default stdout)")

    v = sub.add_parser("verify", help="run verification suites and print a JSON report")
    common(v)
    v.add_argument("--z", type=str, default="", help="pencil parameters z_ab (a<b), or 'random'")
    v.add_argument("--tol", type=float, default=None)
    v.add_argument("--cases", type=int, default=10)
    v.add_argument("--suite", type=str, default="all", choices=("all",) + SUITES)
    v.add_argument("--gamma", type=float, default=1.1)

    f = sub.add_parser("flow", help="integrate a master or reduced flow to CSV")
    common(f)
    f.add_argument("--point", type=str, default=None)
    f.add_argument("--h", type=str, default="re_tr:1", help="e.g. '1*re_tr:1 + 0.5*im_tr:2'")
    f.add_argument("--t", type=float, default=1.0)
    f.add_argument("--dt", type=float, default=1e-2)
    f.add_argument("--reduced", action="store_true")

    lf = sub.add_parser("leaf", help="construct a point on the constraint surface")
    common(lf)
    lf.add_argument("--gamma", type=float, required=True)

    r = sub.add_parser("rs", help="integrate the spin RS flow from a leaf point")
    r.add_argument("--point", type=str, required=True)
    r.add_argument("--t", type=float, default=1.0)
    r.add_argument("--dt", type=float, default=5e-4)
    r.add_argument("--every", type=int, default=1)
    r.add_argument("--out", type=str, default=None)
    return p


def _config(args):
    cfg = RunConfig()
    for key in ("n", "d", "seed"):
        if hasattr(args, key):
            setattr(cfg, key, getattr(args, key))
    if getattr(args, "x", ""):
        cfg.x = _floats(args.x)
    if hasattr(args, "z"):
        cfg.z = None if args.z.strip() == "random" else _floats(args.z)
    for key in ("tol", "cases", "suite", "gamma"):
        if hasattr(args, key):
            setattr(cfg, key, getattr(args, key))
    if hasattr(args, "t"):
        cfg.T, cfg.dt = args.t, args.dt
    cfg.paths = {"out": getattr(args, "out", None), "point": getattr(args, "point", None)}
    return cfg.validate()


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "verify":
            return cmd_verify(cfg, sys.stdout)
        if args.command == "flow":
            return cmd_flow(cfg, matlie.parse_class_fn(args.h), args.reduced)
        if args.command == "leaf":
            return cmd_leaf(cfg)
        if args.command == "rs":
            if args.every < 1:
                raise ConfigError("--every must be positive")
            return cmd_rs(cfg, args.every)
    except (ConfigError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"qpflow: configuration error: {exc}", file=sys.stderr)
        return 2
    except sr.NotConverged as exc:
        print(json.dumps({"error": "NotConverged", "best_residual": exc.args[1][2]}), file=sys.stderr)
        return 1
    except (dyn.RegularityLost, matlie.DegenerateSpectrum, matlie.NearDegenerate, ps.BallExit) as exc:
        print(f"qpflow: numerical failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        # invalid gamma, Hamiltonian or point data
        print(f"qpflow: invalid input: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
