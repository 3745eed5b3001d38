"""Command-line front end.

Every command reads one JSON config (``--config``), applies ``--set``
overrides, writes its data files into the output directory and refreshes
``run_manifest.json`` there. Data files are byte-identical for identical
configs; timestamps live only in the manifest.

Exit codes: 0 success, 2 numerical failure, 3 configuration error,
4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__, kernels
from .coefficients import CoefficientError, bound_report, build_coefficients, write_table_csv
from .config import ConfigError, RunConfig
from .constant_term import constant_term_cmn
from .fock import (ConvergenceError, DimensionError, FockError, bogoliubov_sweep, build_basis,
                   ccr_check_all, diagonalize, kinetic_op, number_op, potential_op, shell_modes,
                   theta_state, unoccupied_annihilation, vn_expectation, vn_kn_constant)
from .lattice import LatticeSizeError, build_lattice
from .potential import ParameterError, Potential
from .scattering import (ScatteringError, integral_Vf, integral_w, neumann_residual,
                         solve_neumann_cached)
from .spectral import (AccelerationError, SummationError, e_lambda, enumerate_excitations,
                       excitation_threshold, ground_state_energy, i_ell, lhy_integral)

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG, EXIT_RESOURCE = 0, 2, 3, 4
COMMANDS = ("scatter", "coeffs", "energy", "elambda", "enumerate", "fock-verify")
MANIFEST = "run_manifest.json"


# ---------------------------------------------------------------------------
# output helpers


def _encode(obj, indent=0):
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent + 1)}" for k, v in sorted(obj.items())]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_encode(v, indent + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return json.dumps(str(x))
        return format(x, ".17g")
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent)
    return json.dumps(str(obj))


def write_json(path, doc):
    """JSON with sorted keys and floats at 17 significant digits."""
    with open(path, "w") as fh:
        fh.write(_encode(doc))
        fh.write("\n")


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """State shared by the stages of one invocation."""

    def __init__(self, cfg: RunConfig, out_dir: str):
        self.cfg = cfg
        self.out = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.stages = []
        self.files = []
        self._sol = None
        self._elambda = None
        self.cache_hits = {}

    @property
    def validity(self):
        return self.cfg.params.validity()

    def emit(self, name, doc):
        doc = dict(doc)
        doc["validity"] = self.validity
        write_json(os.path.join(self.out, name), doc)
        self.files.append(name)

    def emitted(self, name):
        self.files.append(name)

    def solution(self):
        if self._sol is None:
            sol, hit = solve_neumann_cached(self.cfg.potential, self.cfg.params, self.cfg.grid)
            self.cache_hits["scattering"] = hit
            self._sol = sol
        return self._sol

    def elambda(self):
        if self._elambda is None:
            self._elambda = e_lambda(self.cfg["Mmax"], self.cfg["tolerances"]["acceleration_ceiling"])
        return self._elambda

    def write_manifest(self, started):
        path = os.path.join(self.out, MANIFEST)
        previous = {}
        if os.path.exists(path):
            try:
                with open(path) as fh:
                    previous = json.load(fh)
            except (OSError, ValueError):
                previous = {}
        if previous.get("config_hash") != self.cfg.digest():
            previous = {}
        inventory = dict(previous.get("outputs", {}))
        for name in sorted(set(self.files)):
            inventory[name] = sha256_file(os.path.join(self.out, name))
        stages = list(previous.get("stages", [])) + self.stages
        doc = {
            "tool": "dilutebose",
            "version": __version__,
            "backend": kernels.BACKEND,
            "threads": kernels.get_threads(),
            "config_hash": self.cfg.digest(),
            "config": self.cfg.to_dict(),
            "started": started,
            "finished": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "stages": stages,
            "outputs": inventory,
            "cache_hits": self.cache_hits,
            "validity": self.validity,
        }
        write_json(path, doc)


# ---------------------------------------------------------------------------
# stages


def cmd_scatter(run: Run):
    cfg = run.cfg
    sol = run.solution()
    pot, params = cfg.potential, cfg.params
    doc = sol.to_json_dict()
    warnings_list = []
    if pot.is_zero:
        warnings_list.append("trivial potential")
        print("warning: trivial potential (a0 = 0)", file=sys.stderr)
        residuals = {"neumann_max": 0.0, "lambda_expansion": 0.0, "vf_expansion": 0.0,
                     "w_expansion": 0.0}
    else:
        a0, Rb = sol.a0, sol.Rb
        residuals = {
            "neumann_max": float(np.max(np.abs(neumann_residual(sol)))),
            "lambda_expansion": sol.lambda_ell * Rb ** 3 / (3 * a0) - 1 - 1.8 * a0 / Rb,
            "vf_expansion": integral_Vf(sol, pot) - 8 * math.pi * a0 * (1 + 1.5 * a0 / Rb),
            "w_expansion": integral_w(sol) / Rb ** 2 - 0.4 * math.pi * a0,
        }
    doc["residuals"] = residuals
    doc["warnings"] = warnings_list
    run.emit("scattering.json", doc)
    print(f"a0 = {sol.a0:.17g}")
    print(f"lambda_ell = {sol.lambda_ell:.17g}")
    for k, v in residuals.items():
        print(f"residual {k} = {v:.6e}")


def cmd_coeffs(run: Run):
    cfg = run.cfg
    sol = run.solution()
    lat = build_lattice(cfg["pmax"])
    table = build_coefficients(sol, cfg.potential, cfg.params, lat, convolution=cfg["convolution"])
    path = os.path.join(run.out, "coefficients.csv")
    write_table_csv(table, path)
    run.emitted("coefficients.csv")
    rep = bound_report(table, cfg.params, cfg["tolerances"]["bound_ceiling"])
    doc = rep.to_dict()
    doc.update({"points": len(lat), "shells": int(lat.shell_n2.size), "pmax": cfg["pmax"],
                "convolution": cfg["convolution"], "W0": table.W0})
    run.emit("bounds.json", doc)
    print(f"{len(lat)} lattice points, bounds ok = {rep.ok}")


def cmd_energy(run: Run):
    cfg = run.cfg
    sol = run.solution()
    params = cfg.params
    el = run.elambda()
    gs = ground_state_energy(sol.a0, params.N, params.kappa, cfg["pmax"], cfg["Mmax"], elambda=el)
    doc = {"value": gs.total, "breakdown": gs.to_dict(), "a0": sol.a0,
           "lhy_integral": lhy_integral(sol.a0),
           "bogoliubov_over_lhy": (gs.bogoliubov / (float(params.N) ** (2.5 * params.kappa) * lhy_integral(sol.a0))
                                   if sol.a0 > 0 else None)}
    if cfg["constant_term"] and not cfg.potential.is_zero:
        cut = float(params.N) ** params.alpha
        lat = build_lattice(max(2 * math.pi * 1.01, 1.01 * cut))
        table = build_coefficients(sol, cfg.potential, params, lat)
        ct = constant_term_cmn(table, sol, cfg.potential, params, elambda=el)
        doc["constant_term"] = ct.to_dict()
    run.emit("energy.json", doc)
    print(f"E_N = {gs.total:.17g}")


def cmd_elambda(run: Run):
    cfg = run.cfg
    el = run.elambda()
    rows = []
    for ell in cfg["ell_list"]:
        b = i_ell(ell, cfg["Mmax"], "bracket", cfg["tolerances"]["acceleration_ceiling"])
        c = i_ell(ell, cfg["Mmax"], "cosine", cfg["tolerances"]["acceleration_ceiling"])
        rows.append({"ell": ell, "bracket": b.to_dict(), "cosine": c.to_dict(),
                     "six_pi_bracket_minus_e_lambda": 6 * math.pi * b.value - el.value,
                     "six_pi_cosine_minus_e_lambda": 6 * math.pi * c.value - el.value})
    doc = {"e_lambda": el.to_dict(), "value": el.value, "tail_estimate": el.tail_estimate,
           "cutoff": el.cutoff_used, "diagnostics": el.to_dict()["diagnostics"], "I_ell": rows}
    run.emit("elambda.json", doc)
    print(f"e_Lambda = {el.value:.17g} +- {el.tail_estimate:.2e}")


def cmd_enumerate(run: Run):
    cfg = run.cfg
    sol = run.solution()
    p = cfg.params
    T = cfg["threshold_scale"] * excitation_threshold(p.N, p.kappa, p.mu)
    levels = enumerate_excitations(sol.a0, p.N, p.kappa, p.mu, cfg["max_levels"], threshold=T)
    path = os.path.join(run.out, "levels.csv")
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["index", "nu", "occupations"])
        for i, lv in enumerate(levels):
            wr.writerow([i, format(lv.nu, ".17g"), lv.serialize()])
    run.emitted("levels.csv")
    run.emit("levels_meta.json", {"threshold": T, "count": len(levels), "truncated": levels.truncated,
                                  "threshold_scale": cfg["threshold_scale"]})
    print(f"{len(levels)} levels at or below {T:.6g}" + (" (truncated)" if levels.truncated else ""))


def _fock_report(cfg: RunConfig, sol):
    f = cfg["fock"]
    tol = cfg["tolerances"]
    pot, params = cfg.potential, cfg.params
    modes = shell_modes(f["modes_shells"])
    basis = build_basis(modes, f["ncap"], f["Nparam"])
    ccr = ccr_check_all(basis)
    K = kinetic_op(basis)
    V = potential_op(basis, pot, params)
    Np = number_op(basis)
    vmin = float(diagonalize(V, 1)[0]) if V.dimension else 0.0
    vnorm = float(np.max(np.abs(V.matrix.data))) if V.nnz else 0.0
    comm_v = V.matrix @ Np.matrix - Np.matrix @ V.matrix
    comm_k = K.matrix @ Np.matrix - Np.matrix @ K.matrix
    structure = {
        "hermitian": {"K": K.is_symmetric(), "V": V.is_symmetric(), "N": Np.is_symmetric()},
        "V_min_eigenvalue": vmin,
        "V_max_entry": vnorm,
        "V_psd": bool(vmin >= -tol["psd_relative"] * max(vnorm, 1e-300)),
        "V_N_commutator": float(np.max(np.abs(comm_v.data))) if comm_v.nnz else 0.0,
        "K_N_commutator": float(np.max(np.abs(comm_k.data))) if comm_k.nnz else 0.0,
    }
    # Bogoliubov pair with closed-form levels
    pair = [[1, 0, 0], [-1, 0, 0]]
    pair_sweep = bogoliubov_sweep(pair, [2.0, 2.0], [1.0, 1.0], f["pair_ncaps"], f["levels"])
    # two pairs with coefficients from the lowest two shells
    lat = build_lattice(1.001 * max(2 * math.pi * math.sqrt(2), float(params.N) ** params.alpha))
    table = build_coefficients(sol, pot, params, lat)
    Fs, Gs = table.shell("F"), table.shell("G")
    two = [[1, 0, 0], [-1, 0, 0], [1, 1, 0], [-1, -1, 0]]
    Ft = [Fs[0], Fs[0], Fs[1], Fs[1]]
    Gt = [Gs[0], Gs[0], Gs[1], Gs[1]]
    table_sweep = bogoliubov_sweep(two, Ft, Gt, f["table_ncaps"], f["levels"])
    tgaps = [r.max_gap for r in table_sweep]
    # V_N <= C K N_+
    consts = []
    for nc in f["ncap_sweep"]:
        b = build_basis(modes, nc, max(nc, f["Nparam"]))
        consts.append({"ncap": nc, "C": vn_kn_constant(b, pot, params)})
    doubled = Potential.from_dict(dict(pot.to_dict(), V0=2 * pot.V0)) if pot.kind == "soft_sphere" else None
    lin = None
    if doubled is not None and consts[-1]["C"] > 0:
        b = build_basis(modes, f["ncap_sweep"][-1], max(f["ncap_sweep"][-1], f["Nparam"]))
        lin = vn_kn_constant(b, doubled, params) / consts[-1]["C"]
    cs = [c["C"] for c in consts]
    spread = (max(cs) / min(cs) - 1.0) if min(cs) > 0 else (0.0 if max(cs) == 0 else math.inf)
    # product states
    th_occ = np.zeros(basis.n_modes, dtype=np.int64)
    th_occ[0] = 1
    th_occ[1] = 1
    theta = theta_state(basis, th_occ)
    return {
        "basis_spec": basis.spec(),
        "ccr": {"deviations": ccr, "tolerance": tol["ccr"],
                "passed": bool(max(ccr.values()) <= tol["ccr"])},
        "structure": structure,
        "bogoliubov_pair": {"F": 2.0, "G": 1.0, "ncap_sweep": [r.to_dict() for r in pair_sweep],
                            "passed": bool(pair_sweep[-1].max_gap <= tol["bogoliubov"])},
        "bogoliubov_table": {"modes": two, "F": Ft, "G": Gt,
                             "ncap_sweep": [r.to_dict() for r in table_sweep],
                             "monotone": bool(all(b < a for a, b in zip(tgaps, tgaps[1:])))},
        "vn_kn": {"ncap_sweep": consts, "relative_spread": spread, "doubling_ratio": lin},
        "theta": {"occupations": th_occ.tolist(),
                  "vn_expectation": vn_expectation(basis, theta, V),
                  "vacuum_vn_expectation": vn_expectation(basis, theta_state(basis, np.zeros(basis.n_modes, dtype=np.int64)), V),
                  "unoccupied_annihilation": unoccupied_annihilation(basis, theta)},
    }


def cmd_fock(run: Run):
    rep = _fock_report(run.cfg, run.solution())
    rep["check_name"] = "fock_verifier"
    run.emit("fock_report.json", rep)
    print(f"ccr max deviation = {max(rep['ccr']['deviations'].values()):.3e}")


STAGES = {"scatter": cmd_scatter, "coeffs": cmd_coeffs, "energy": cmd_energy,
          "elambda": cmd_elambda, "enumerate": cmd_enumerate, "fock-verify": cmd_fock}


# ---------------------------------------------------------------------------
# entry point


def _classify(exc):
    if isinstance(exc, (DimensionError, LatticeSizeError, MemoryError)):
        return EXIT_RESOURCE
    if isinstance(exc, (ConfigError, ParameterError, FockError, CoefficientError)):
        return EXIT_CONFIG
    if isinstance(exc, (ScatteringError, AccelerationError, SummationError, ConvergenceError,
                        FloatingPointError, ArithmeticError, RuntimeError, ValueError)):
        return EXIT_NUMERIC
    return None


def _fail(code, exc, stage=None):
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if stage:
        doc["stage"] = stage
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    return code


def build_parser():
    ap = argparse.ArgumentParser(prog="dilutebose", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS + ("all",):
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="JSON run configuration")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
        p.add_argument("--set", metavar="K=V", action="append", default=[],
                       help="override a config entry by dotted path; repeatable")
        p.add_argument("--threads", metavar="N", type=int, default=1, help="worker threads for kernels")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        cfg = cfg.with_overrides(args.set)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)
    kernels.set_threads(args.threads)
    out = args.out or cfg["output_dir"]
    started = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    names = list(COMMANDS) if args.command == "all" else [args.command]
    try:
        run = Run(cfg, out)
    except OSError as exc:
        return _fail(EXIT_CONFIG, exc)
    code = EXIT_OK
    for name in names:
        t0 = time.time()
        try:
            STAGES[name](run)
            run.stages.append({"stage": name, "status": "ok", "seconds": round(time.time() - t0, 3)})
        except Exception as exc:  # mapped to an exit code below
            c = _classify(exc)
            if c is None:
                raise
            run.stages.append({"stage": name, "status": "failed", "error": type(exc).__name__})
            code = _fail(c, exc, name)
            break
    run.write_manifest(started)
    return code


if __name__ == "__main__":
    sys.exit(main())
