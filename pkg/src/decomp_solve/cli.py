"""decomp-solve command line.

Exit codes
    0  success (analyze: a solution exists)
    1  input error (unreadable or invalid config, bad flags, mismatched solution file)
    2  hypothesis violated (singular map, spectral gap, failed precondition)
    3  no solution exists (analyze/solve)
    4  existence undetermined (analyze/solve)
    5  verification failed
    6  internal consistency error or no empirical convergence
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import replace
from typing import Optional

import numpy as np

from . import __version__
from . import measures as ms
from .config import RunConfig, RunReport, config_hash, dumps_canonical, load_config
from .errors import (
    ConsistencyError,
    HypothesisError,
    InputError,
    NoSolutionError,
    PreconditionError,
    SpectralGapError,
)
from .mc import (
    DiracRepr,
    EmpiricalRepr,
    GaussianRepr,
    derive_rng,
    energy_distance_test,
    read_samples_csv,
    simulate_paths,
    write_paths_csv,
    write_samples_csv,
)
from .solver import (
    SolutionFamily,
    analyze_existence,
    extremal_family,
    solve_fundamental,
    strong_decomposability_check,
    verify_solution,
)

log = logging.getLogger("decomp_solve")

EXIT_OK, EXIT_INPUT, EXIT_HYPOTHESIS, EXIT_NOT_EXISTS, EXIT_UNDETERMINED, EXIT_VERIFY, EXIT_INTERNAL = range(7)
STATUS_EXIT = {"exists": EXIT_OK, "not_exists": EXIT_NOT_EXISTS, "undetermined": EXIT_UNDETERMINED}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="decomp-solve", description="Solve lambda_k = mu_k * phi(lambda_{k-1}) for noise processes.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("analyze", "solve", "verify", "simulate"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True)
        s.add_argument("--out", default="decomp_out")
        s.add_argument("--seed", type=int)
        s.add_argument("--samples", type=int)
        s.add_argument("--horizon", type=int)
        s.add_argument("--tol", type=float)
        s.add_argument("--p", type=float)
        s.add_argument("--shift-v", dest="shift_v")
        s.add_argument("--force", action="store_true")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "verify":
            s.add_argument("--solution", default=None, help="solution.json (default: <out>/solution.json)")
    return p


def _effective_config(cfg: RunConfig, args) -> RunConfig:
    upd = {}
    for key in ("seed", "samples", "horizon", "tol", "p"):
        v = getattr(args, key)
        if v is not None:
            upd[key] = v
    if args.force:
        upd["force"] = True
    if args.shift_v is not None:
        try:
            upd["shift_v"] = [float(x) for x in args.shift_v.split(",")]
        except ValueError:
            raise InputError(f"--shift-v expects a comma-separated vector, got {args.shift_v!r}") from None
    if not upd:
        return cfg
    data = cfg.model_dump(mode="python")
    data["options"].update(upd)
    from .config import parse_config

    return parse_config(json.dumps(data))


# --------------------------------------------------------------------------
# solution files


def _marginal_entry(k: int, m, out_dir: str, write_files: bool) -> dict:
    if isinstance(m, GaussianRepr):
        return {"k": k, "mean": np.asarray(m.mean).tolist(), "cov": np.asarray(m.cov).tolist()}
    if isinstance(m, DiracRepr):
        return {"k": k, "point": np.asarray(m.point).tolist()}
    fname = f"samples_k{k}.csv"
    if write_files:
        write_samples_csv(os.path.join(out_dir, fname), m.samples)
    return {"k": k, "samples_file": fname, "seed": m.seed, "N_truncation": m.N_truncation, "n": int(m.samples.shape[0])}


def family_summary(fam: SolutionFamily, out_dir: str, write_files: bool = True) -> dict:
    return {
        "kind": fam.kind,
        "k_min": fam.k_min,
        "k_max": fam.k_max,
        "shift_param_dim": fam.shift_param_dim,
        "N_truncation": fam.N,
        "certified": fam.certified,
        "mean_method": fam.mean_method,
        "diagnostic": fam.diagnostic,
        "shift_v": None if fam.shift is None else fam.shift.tolist(),
        "marginals": [_marginal_entry(k, fam.marginals[k], out_dir, write_files) for k in fam.ks],
    }


def load_family(path: str, dim: int) -> SolutionFamily:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        sol = data.get("solution", data)
        kind, k_min, k_max = sol["kind"], int(sol["k_min"]), int(sol["k_max"])
        base = os.path.dirname(os.path.abspath(path))
        marg = {}
        for e in sol["marginals"]:
            k = int(e["k"])
            if "cov" in e:
                marg[k] = GaussianRepr(np.asarray(e["mean"], float), np.asarray(e["cov"], float))
            elif "point" in e:
                marg[k] = DiracRepr(np.asarray(e["point"], float))
            else:
                pts = read_samples_csv(os.path.join(base, e["samples_file"]))
                marg[k] = EmpiricalRepr(pts, int(e["seed"]), int(e["N_truncation"]))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"cannot read solution file {path}: {exc}") from None
    if sorted(marg) != list(range(k_min, k_max + 1)):
        raise InputError("solution marginals do not cover the declared window")
    for m in marg.values():
        arr = m.mean if isinstance(m, GaussianRepr) else m.point if isinstance(m, DiracRepr) else m.samples[0]
        if np.asarray(arr).shape[-1] != dim:
            raise InputError("solution dimension does not match the config")
    shift = sol.get("shift_v")
    return SolutionFamily(
        k_min, k_max, marg, kind, dim, int(sol.get("N_truncation") or 0),
        shift=None if shift is None else np.asarray(shift, float),
        mean_method=sol.get("mean_method", ""), certified=bool(sol.get("certified", True)),
    )


# --------------------------------------------------------------------------
# commands


def cmd_analyze(cfg: RunConfig, out_dir: str, args=None) -> tuple:
    rep = analyze_existence(cfg.to_process(), cfg.to_map(), cfg.solver_options())
    return STATUS_EXIT[rep.status], {"existence": rep.to_dict()}, f"status {rep.status}"


def cmd_solve(cfg: RunConfig, out_dir: str, args=None) -> tuple:
    process, phi, opts = cfg.to_process(), cfg.to_map(), cfg.solver_options()
    rep = analyze_existence(process, phi, opts)
    body = {"existence": rep.to_dict()}
    if rep.status != "exists" and not opts.force:
        return STATUS_EXIT[rep.status], body, f"existence {rep.status}; use --force to explore"
    fam = solve_fundamental(process, phi, cfg.options.k_min, cfg.options.k_max, opts, report=rep)
    if cfg.options.shift_v is not None:
        fam = extremal_family(fam, cfg.options.shift_v, phi)
        fam = replace(fam, residuals=verify_solution(fam, process, phi, opts))
    summary = family_summary(fam, out_dir)
    summary["tol"] = opts.tol
    body["solution"] = summary
    body["verification"] = fam.residuals.to_dict()
    with open(os.path.join(out_dir, "solution.json.tmp"), "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical({"config_hash": config_hash(cfg), "solution": summary}))
    os.replace(os.path.join(out_dir, "solution.json.tmp"), os.path.join(out_dir, "solution.json"))
    code = EXIT_OK if fam.residuals.passed else EXIT_VERIFY
    return code, body, f"{fam.kind} solution on [{fam.k_min}, {fam.k_max}]"


def cmd_verify(cfg: RunConfig, out_dir: str, args=None) -> tuple:
    path = getattr(args, "solution", None) or os.path.join(out_dir, "solution.json")
    fam = load_family(path, cfg.dim)
    o = cfg.options
    if fam.k_min < o.k_min or fam.k_max > o.k_max:
        raise InputError(f"solution window [{fam.k_min}, {fam.k_max}] outside config window [{o.k_min}, {o.k_max}]")
    phi = cfg.to_map()
    ver = verify_solution(fam, cfg.to_process(), phi, cfg.solver_options())
    body = {"verification": ver.to_dict()}
    n_max = min(10, fam.k_max - fam.k_min)
    if n_max >= 1:
        body["decay"] = strong_decomposability_check(fam, phi, n_max).to_dict()
    msg = "all residuals within tolerance" if ver.passed else f"failed at k={ver.failed_ks}"
    return (EXIT_OK if ver.passed else EXIT_VERIFY), body, msg


def _draw_marginal(m, n: int, rng) -> np.ndarray:
    if isinstance(m, EmpiricalRepr):
        return np.asarray(m.samples)[rng.integers(0, m.samples.shape[0], size=n)]
    return ms.sample(m.to_model(), n, None, rng=rng)


def cmd_simulate(cfg: RunConfig, out_dir: str, args=None) -> tuple:
    o = cfg.options
    k_start = o.k_min if o.k_start is None else o.k_start
    k_end = o.k_max if o.k_end is None else o.k_end
    if k_start >= k_end:
        raise InputError(f"need k_start < k_end, got {k_start} >= {k_end}")
    process, phi, opts = cfg.to_process(), cfg.to_map(), cfg.solver_options()
    fam = None
    try:
        rep = analyze_existence(process, phi, opts)
        if rep.status == "exists":
            fam = solve_fundamental(process, phi, k_start, k_end, opts, report=rep)
    except (NoSolutionError, HypothesisError, SpectralGapError) as exc:
        log.info("no fundamental solution for comparison: %s", exc)
    initial = cfg.initial_model()
    if initial is None:
        initial = fam.marginals[k_start] if fam is not None else ms.Dirac(np.zeros(cfg.dim))
    ens = simulate_paths(process, phi, initial, k_start, k_end, o.n_paths, o.seed)
    write_paths_csv(os.path.join(out_dir, "paths.csv"), ens)
    sim = {
        "paths_file": "paths.csv",
        "k_start": k_start,
        "k_end": k_end,
        "n_paths": ens.n_paths,
        "max_recursion_residual": ens.max_residual(phi),
        "initial": "fundamental" if cfg.options.initial is None and fam is not None else "configured",
        "comparison": None,
    }
    if fam is not None:
        end = ens.marginal(k_end)
        target = fam.marginals[k_end]
        if isinstance(target, DiracRepr):
            gap = float(np.max(np.linalg.norm(end - target.point, axis=1)))
            sim["comparison"] = {"k": k_end, "max_gap": gap, "passed": gap <= 1e-9 * (1 + np.linalg.norm(target.point))}
        elif ens.n_paths >= 50:
            ref = _draw_marginal(target, ens.n_paths, derive_rng(o.seed, 5, k_end))
            t = energy_distance_test(end, ref, o.permutations, o.seed)
            sim["comparison"] = {"k": k_end, **t.to_dict(), "passed": t.p_value > o.alpha}
    return EXIT_OK, {"simulation": sim}, f"{ens.n_paths} paths on [{k_start}, {k_end}]"


COMMANDS = {"analyze": cmd_analyze, "solve": cmd_solve, "verify": cmd_verify, "simulate": cmd_simulate}


def _write_report(out_dir: str, report: RunReport) -> None:
    path = os.path.join(out_dir, "report.json")
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(report.dumps())
    os.replace(tmp, path)


def main(argv: Optional[list] = None) -> int:
    t0 = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
    except InputError as exc:
        print(f"decomp-solve: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    cfg = None
    body: dict = {}
    try:
        cfg = _effective_config(load_config(args.config), args)
        os.makedirs(args.out, exist_ok=True)
        code, body, msg = COMMANDS[args.command](cfg, args.out, args)
    except InputError as exc:
        code, msg = EXIT_INPUT, f"input error: {exc}"
    except (HypothesisError, SpectralGapError, PreconditionError) as exc:
        code, msg = EXIT_HYPOTHESIS, f"hypothesis violated: {exc}"
    except NoSolutionError as exc:
        code, msg = EXIT_INTERNAL, str(exc)
    except ConsistencyError as exc:
        code, msg = EXIT_INTERNAL, f"internal consistency error: {exc}"
    if cfg is None:
        print(f"decomp-solve: {msg}", file=sys.stderr)
        return code
    report = RunReport(
        command=args.command,
        exit_code=code,
        message=msg,
        config=cfg.model_dump(mode="python"),
        config_hash=config_hash(cfg),
        seed=cfg.options.seed,
        wall_clock_s=time.perf_counter() - t0,
        **body,
    )
    try:
        _write_report(args.out, report)
    except OSError as exc:
        print(f"decomp-solve: cannot write report: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"{args.command}: {msg} (exit {code})", file=sys.stderr if code else sys.stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
