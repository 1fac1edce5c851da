"""Command-line front end.

``perturbed-qsl <command> [--config PATH] [--out DIR] [--seed N]
[--grid-points N] [--t-max X] [--shots N] [--quiet]``

Commands: run, fig2, fig3, witness, result1, result2, result3, result4,
fdr, linear-response, random-suite, schema.  Exit codes: 0 success,
1 usage or configuration error, 2 bound violation (margin below -1e-6).
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import os
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from ._backend import BACKEND
from .errors import PQSLError
from .gksl_dynamics import Scaled, hamiltonian_generator
from .linalg_core import operator_norm
from .quantum_state import Measurement, bell_states, projector
from .scenarios import (
    SX,
    SZ,
    Scenario,
    fig2_run,
    fig3_run,
    quench_scenario,
    random_instance,
    two_qubit_dephasing,
)
from .speed_limits import (
    VIOLATION_TOL,
    delta_est,
    fdr_check,
    linear_response_bounds,
    result1_bound,
    result2_bound,
    result3_bound,
    result4_bound,
    weak_coupling_trajectories,
)
from .weak_coupling import WeakCouplingModel, build_secular_me, default_step, flat_bath, ohmic_gamma, timescales

COMMAND_REPORTS = {
    "fig2": ["fig2"],
    "fig3": ["fig3"],
    "witness": ["witness"],
    "result1": ["result1"],
    "result2": ["result2"],
    "result3": ["result3"],
    "result4": ["result4"],
    "fdr": ["fdr"],
    "linear-response": ["linear_response"],
}
QUENCH_REPORTS = {"result4", "fdr"}


class ConfigError(Exception):
    """Invalid configuration; the message names the offending field."""


def load_schema() -> dict:
    text = resources.files("perturbed_qsl").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def _cmatrix(value, field):
    try:
        arr = np.array([[complex(float(z[0]), float(z[1])) for z in row] for row in value])
    except Exception as exc:
        raise ConfigError(f"{field}: matrix entries must be [re, im] pairs ({exc})") from exc
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigError(f"{field}: matrix must be square, got shape {arr.shape}")
    return arr


def _jmatrix(M):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(M, dtype=complex)]


def default_config(command: str) -> dict:
    cfg = {"schema_version": 1, "grid": {"t_max": 2.0, "points": 400}, "seed": 0, "shots": 0}
    if command in ("result4", "fdr"):
        cfg["scenario"] = {
            "name": "quench",
            "H": _jmatrix(0.5 * SZ),
            "dH": _jmatrix(0.05 * SX),
            "beta": 1.0,
            "couplings": [_jmatrix(SZ)],
            "lambda": 0.1,
            "bath": {"kind": "ohmic", "eta": 0.01, "omega_c": 20.0, "beta": 1.0},
        }
    else:
        cfg["scenario"] = {"name": "two_qubit_dephasing", "h": 1.0, "lambda": 0.1, "gamma0": 0.1, "v": 0.1}
    return cfg


def validate_config(cfg: dict) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            path = "/".join(str(p) for p in e.absolute_path) or "<root>"
            if e.validator == "required":
                missing = [r for r in e.validator_value if r not in e.instance]
                for m in missing:
                    lines.append(f"{path}: missing required field '{m}'")
            else:
                lines.append(f"{path}: {e.message}")
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines))


def _bath(spec, field):
    kind = spec["kind"]
    try:
        if kind == "flat":
            return flat_bath(spec["gamma0"])
        return ohmic_gamma(spec["eta"], spec["omega_c"], spec["beta"])
    except KeyError as exc:
        raise ConfigError(f"{field}: missing field {exc.args[0]!r} for bath kind '{kind}'") from exc


def _require(sc, key):
    if key not in sc:
        raise ConfigError(f"scenario/{key}: missing required field for scenario '{sc['name']}'")
    return sc[key]


def build_scenario(cfg: dict, grid) -> Scenario:
    sc = cfg.get("scenario", {"name": "two_qubit_dephasing"})
    name = sc["name"]
    if name == "two_qubit_dephasing":
        return two_qubit_dephasing(sc.get("h", 1.0), sc.get("lambda", 0.1), sc.get("gamma0", 0.1),
                                   sc.get("v", 0.1), grid)
    if name == "explicit":
        H = _cmatrix(_require(sc, "H"), "scenario/H")
        couplings = [_cmatrix(A, f"scenario/couplings/{i}") for i, A in enumerate(_require(sc, "couplings"))]
        bath = _bath(_require(sc, "bath"), "scenario/bath")
        model = WeakCouplingModel(H, couplings, _require(sc, "lambda"), bath)
        V = _cmatrix(_require(sc, "V"), "scenario/V")
        rho0 = _cmatrix(_require(sc, "rho0"), "scenario/rho0")
        meas = None
        if "measurement_basis" in sc:
            meas = Measurement.projective(_cmatrix(sc["measurement_basis"], "scenario/measurement_basis"))
        return Scenario("explicit", model=model, V=V, v=float(_require(sc, "v")), rho0=rho0, grid=grid,
                        measurement=meas, threshold=sc.get("threshold"))
    if name == "quench":
        H = _cmatrix(_require(sc, "H"), "scenario/H")
        dH = _cmatrix(_require(sc, "dH"), "scenario/dH")
        couplings = [_cmatrix(A, f"scenario/couplings/{i}") for i, A in enumerate(_require(sc, "couplings"))]
        bath = _bath(_require(sc, "bath"), "scenario/bath")
        return quench_scenario(H, dH, float(_require(sc, "beta")), couplings, float(_require(sc, "lambda")),
                               bath, grid)
    raise ConfigError(f"scenario/name: unknown scenario {name!r}")  # pragma: no cover - schema guards this


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: str, columns: dict, header: list) -> None:
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k, v in header:
            fh.write(f"# {k}: {v}\n")
        fh.write(",".join(names) + "\n")
        for i in range(len(cols[0]) if cols else 0):
            fh.write(",".join(_fmt(c[i]) for c in cols) + "\n")


class Context:
    """Shares expensive trajectories between reports of one run."""

    def __init__(self, cfg: dict, scenario: Scenario, grid, h_int):
        self.cfg = cfg
        self.scenario = scenario
        self.grid = grid
        self.h_int = h_int
        self._run = None

    def run(self):
        if self._run is None:
            sc = self.scenario
            self._run = weak_coupling_trajectories(sc.model, sc.V, sc.v, sc.rho0, self.grid, self.h_int)
        return self._run

    def observable(self):
        if "observable" in self.cfg:
            return _cmatrix(self.cfg["observable"], "observable")
        if self.scenario.name == "two_qubit_dephasing":
            return projector(bell_states()[:, 0])
        return self.scenario.V


def _need_weak(ctx, report):
    if ctx.scenario.model is None or ctx.scenario.name == "quench":
        raise ConfigError(f"reports/{report}: needs a weak-coupling scenario (two_qubit_dephasing or explicit)")


def _need_quench(ctx, report):
    if ctx.scenario.name != "quench":
        raise ConfigError(f"reports/{report}: needs scenario/name = 'quench'")


def run_report(name: str, ctx: Context) -> dict:
    """Return ``{"columns", "min_margin", "summary", "warnings", "h_int"}`` for one report."""
    sc = ctx.scenario
    out = {"min_margin": None, "summary": [], "warnings": [], "h_int": ctx.h_int}
    if name in ("fig2", "witness"):
        _need_weak(ctx, name)
        if sc.measurement is None or sc.threshold is None:
            raise ConfigError(f"reports/{name}: scenario needs measurement_basis and threshold")
        tab = fig2_run(sc, ctx.grid, shots=ctx.cfg.get("shots", 0), seed=ctx.cfg.get("seed", 0), run=ctx.run())
        out["h_int"] = tab.meta["h_int"]
        out["warnings"] = tab.meta["warnings"]
        if name == "fig2":
            out["columns"] = tab.columns
            for key in ("crossing_exact_qfi", "crossing_corrected", "crossing_measured"):
                out["summary"].append(f"{key}: {tab.meta[key]!r}")
            out["summary"].append(f"epsilon_upper: {tab.meta['epsilon_upper']!r}")
        else:
            run = ctx.run()
            t = run.times - run.times[0]
            stat = tab["measured_speed"]
            eps = run.first_order.expansion.epsilon_upper
            corr = np.full(len(t), np.nan)
            pos = t > 0
            corr[pos] = math.sqrt(sc.threshold) + 2.0 * delta_est(t[pos], sc.v, operator_norm(sc.V), eps) / (sc.v * t[pos])
            witnessed = np.where(pos, stat > corr, False)
            max_qfi = np.maximum.accumulate(run.sqrt_qfi_eta ** 2)
            sound = bool(np.all(max_qfi[witnessed] > sc.threshold)) if np.any(witnessed) else True
            out["columns"] = {"t": run.times, "statistic": stat, "corrected_threshold": corr,
                              "witnessed": witnessed, "max_qfi_so_far": max_qfi}
            out["summary"].append(f"witnessed_points: {int(np.sum(witnessed))}")
            out["summary"].append(f"soundness: {'ok' if sound else 'FAILED'}")
            out["min_margin"] = 0.0 if sound else -math.inf
    elif name == "fig3":
        _need_weak(ctx, name)
        tab = fig3_run(sc, ctx.grid, run=ctx.run())
        out["columns"] = tab.columns
        out["h_int"] = tab.meta["h_int"]
        out["warnings"] = tab.meta["warnings"]
        m = tab["delta_est"] - tab["delta1_plus_delta2"]
        out["min_margin"] = float(np.min(m))
        out["summary"].append(f"min(delta_est - delta1 - delta2): {float(np.min(m))!r}")
        out["summary"].append(f"delta2_dominates: {bool(np.all(tab['delta2'] >= tab['delta1']))}")
    elif name in ("result1", "result2"):
        _need_weak(ctx, name)
        me = build_secular_me(sc.model)
        h = ctx.h_int or default_step(timescales(sc.model, sc.v))
        h = min(h, float(np.min(np.diff(ctx.grid))))
        pert = Scaled(sc.v, hamiltonian_generator(sc.V))
        if name == "result1":
            rep = result1_bound(me.generator, pert, sc.rho0, ctx.grid, h_int=h)
        else:
            rep = result2_bound(me.generator, pert, ctx.observable(), sc.rho0, ctx.grid, h_int=h)
        out.update(columns=rep.columns(), min_margin=rep.min_margin, h_int=rep.metadata["h_int"])
    elif name == "result3":
        _need_weak(ctx, name)
        rep, bud = result3_bound(sc.model, sc.V, sc.v, sc.rho0, ctx.grid, run=ctx.run())
        cols = rep.columns()
        cols.update(rhs_exact=rep.metadata["rhs_exact"], delta1=bud.delta1, delta2=bud.delta2,
                    delta_est=bud.delta_est)
        exact_margin = float(np.min(rep.metadata["rhs_exact"] - rep.lhs))
        out.update(columns=cols, min_margin=min(rep.min_margin, exact_margin), h_int=rep.metadata["h_int"],
                   warnings=rep.metadata["warnings"])
        out["summary"].append(f"min margin with exact errors: {exact_margin!r}")
    elif name == "result4":
        _need_quench(ctx, name)
        H = sc.model.H
        rep, _ = result4_bound(H, sc.extras["H_prime"], sc.extras["beta"], sc.model, ctx.grid, h_int=ctx.h_int)
        out.update(columns=rep.columns(), min_margin=rep.min_margin, h_int=rep.metadata["h_int"],
                   warnings=rep.metadata["warnings"])
        out["summary"].append(f"ibar: {rep.metadata['ibar']!r}")
        out["summary"].append(f"quantum_driving: {rep.metadata['quantum_driving']}")
    elif name == "fdr":
        _need_quench(ctx, name)
        H = sc.model.H
        dH = sc.extras["H_prime"] - H
        rows = {k: [] for k in ("scale", "var_w", "w_diss_exact", "kubo_mori_half_beta", "q_w", "residual")}
        for s in (1.0, 0.5, 0.25):
            rec = fdr_check(H, s * dH, sc.extras["beta"])
            rows["scale"].append(s)
            for k in list(rows)[1:]:
                rows[k].append(rec[k])
        r = np.abs(np.array(rows["residual"]))
        if np.all(r > 0):
            slope = float(np.polyfit(np.log(rows["scale"]), np.log(r), 1)[0])
            out["summary"].append(f"residual log-log slope: {slope!r}")
        out["columns"] = rows
    elif name == "linear_response":
        _need_weak(ctx, name)
        me = build_secular_me(sc.model)
        L = me.generator
        pi = steady_state(L)
        lr = ctx.cfg.get("linear_response", {})
        v = lr.get("v", sc.v)
        eps = lr.get("epsilon")
        if eps is None:
            from .weak_coupling import expand

            eps = expand(sc.model, sc.V, v).expansion.epsilon_upper
        b1, b2 = linear_response_bounds(L, pi, ctx.observable(), sc.V, v, ctx.grid, eps, h_int=ctx.h_int)
        out["columns"] = {"t": b1.times, "delta_A": b1.lhs, "bound_norm": b1.rhs, "bound_variance": b2.rhs}
        out["min_margin"] = min(b1.min_margin, b2.min_margin)
        out["h_int"] = b1.metadata["h_int"]
    else:  # pragma: no cover - schema guards this
        raise ConfigError(f"reports: unknown report {name!r}")
    return out


def steady_state(G) -> np.ndarray:
    """Long-time limit of the maximally mixed state under a time-independent generator.

    Fixed points need not be unique (pure dephasing has several), so the
    state is propagated for forty relaxation times of the slowest decaying
    mode rather than picked from the null space.
    """
    from scipy.linalg import expm

    M = G.superoperator()
    w = np.linalg.eigvals(M)
    rates = np.abs(w.real)[np.abs(w) > 1e-9]
    rates = rates[rates > 1e-12]
    d = G.dim
    x = np.eye(d, dtype=complex).reshape(-1, order="F") / d
    if rates.size:
        x = expm(M * (40.0 / float(rates.min()))) @ x
    X = x.reshape(d, d, order="F")
    X = 0.5 * (X + X.conj().T)
    return X / np.real(np.trace(X))


def random_suite(count: int, dims, seed: int):
    """Result 1 and Result 2 margins on ``count`` random instances."""
    cols = {k: [] for k in ("instance", "dim", "seed", "v", "result1_min_margin", "result2_min_margin")}
    for i in range(count):
        d = dims[i % len(dims)]
        s = seed * 100003 + i
        sc = random_instance(d, s)
        pert = Scaled(sc.v, hamiltonian_generator(sc.V))
        r1 = result1_bound(sc.generator, pert, sc.rho0, sc.grid)
        r2 = result2_bound(sc.generator, pert, sc.extras["observable"], sc.rho0, sc.grid)
        for k, val in zip(cols, (i, d, s, sc.v, r1.min_margin, r2.min_margin)):
            cols[k].append(val)
    return cols


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="perturbed-qsl", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ["run", *COMMAND_REPORTS, "random-suite", "schema"]:
        sp = sub.add_parser(name)
        if name == "schema":
            continue
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--grid-points", type=int)
        sp.add_argument("--t-max", type=float)
        sp.add_argument("--shots", type=int, help="0 = exact probabilities")
        sp.add_argument("--quiet", action="store_true")
        if name == "random-suite":
            sp.add_argument("--count", type=int)
            sp.add_argument("--dims", help="comma-separated dimensions, e.g. 2,3,4")
    return p


def effective_config(args) -> dict:
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config: top level must be a JSON object")
    else:
        cfg = default_config(args.command)
    cfg = copy.deepcopy(cfg)
    if args.t_max is not None or args.grid_points is not None:
        g = cfg.setdefault("grid", {})
        if args.t_max is not None:
            g["t_max"] = args.t_max
        if args.grid_points is not None:
            g["points"] = args.grid_points
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.shots is not None:
        cfg["shots"] = args.shots
    if args.command == "random-suite":
        rs = cfg.setdefault("random_suite", {})
        if args.count is not None:
            rs["count"] = args.count
        if args.dims:
            try:
                rs["dims"] = [int(x) for x in args.dims.split(",")]
            except ValueError as exc:
                raise ConfigError(f"--dims: expected comma-separated integers, got {args.dims!r}") from exc
    validate_config(cfg)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps(load_schema(), indent=2))
        return 0
    log = (lambda *a: None) if args.quiet else (lambda *a: print(*a))
    try:
        cfg = effective_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    os.makedirs(args.out, exist_ok=True)
    chash = config_hash(cfg)
    seed = cfg.get("seed", 0)
    points = cfg["grid"].get("points", 400)
    grid = np.linspace(0.0, float(cfg["grid"]["t_max"]), int(points))
    h_int = cfg.get("integrator", {}).get("h_int")

    def header(h):
        return [("tool", f"perturbed_qsl {__version__}"), ("backend", BACKEND), ("config_sha256", chash),
                ("seed", seed), ("h_int", repr(float(h)) if h is not None else "default")]

    summary = [f"perturbed_qsl {__version__}", f"config_sha256: {chash}", f"seed: {seed}"]
    warnings: list = []
    violated = False
    try:
        if args.command == "random-suite":
            rs = cfg.get("random_suite", {})
            cols = random_suite(int(rs.get("count", 100)), rs.get("dims", [2, 3, 4]), seed)
            write_csv(os.path.join(args.out, "random_suite.csv"), cols, header(None))
            margins = [m for k in ("result1_min_margin", "result2_min_margin") for m in cols[k]]
            worst = min(margins) if margins else math.inf
            violated = worst < -VIOLATION_TOL
            summary.append(f"random_suite: {len(cols['instance'])} instances, worst margin {worst!r}")
        else:
            reports = COMMAND_REPORTS.get(args.command) or cfg.get("reports") or ["fig2", "fig3"]
            scenario = build_scenario(cfg, grid)
            if scenario.model is not None and scenario.name != "quench":
                ts = timescales(scenario.model, scenario.v)
                warnings.extend(f"timescale assumption {k} fails" for k in ts.failed())
            ctx = Context(cfg, scenario, grid, h_int)
            for name in reports:
                res = run_report(name, ctx)
                write_csv(os.path.join(args.out, f"{name}.csv"), res["columns"], header(res["h_int"]))
                mm = res["min_margin"]
                status = "n/a"
                if mm is not None:
                    if mm < -VIOLATION_TOL:
                        status = "VIOLATION"
                        violated = True
                    elif mm < 0:
                        status = "ok (numerical noise)"
                    else:
                        status = "ok"
                summary.append(f"[{name}] min margin: {'n/a' if mm is None else repr(mm)} status: {status}")
                summary.extend(f"  {line}" for line in res["summary"])
                for w in res["warnings"]:
                    if w not in warnings:
                        warnings.append(w)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PQSLError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    summary.append("warnings:")
    summary.extend(f"  {w}" for w in warnings) if warnings else summary.append("  none")
    with open(os.path.join(args.out, "summary.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(summary) + "\n")
    log("\n".join(summary))
    return 2 if violated else 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
