"""Command-line front end: ``spdkernels {check,gram,interpolate,witness,basis,oracle}``.

Exit codes: 0 proven (or success), 2 disproven, 3 unknown, 1 error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import gram_interp as gi
from . import kernels as kn
from . import pd_checker as pc
from .manifold import (
    eigenvalue,
    make_manifold,
    multiplicity,
    read_points_csv,
    sample_points,
    write_points_csv,
)
from .special_fn import addition_coefficient, jacobi_at_one, sphere2_harmonics
from .spectral_sets import Status, Verdict

log = logging.getLogger("spdkernels")

EXIT_OK, EXIT_ERROR, EXIT_DISPROVEN, EXIT_UNKNOWN = 0, 1, 2, 3
_STATUS_EXIT = {Status.PROVEN: EXIT_OK, Status.DISPROVEN: EXIT_DISPROVEN, Status.UNKNOWN: EXIT_UNKNOWN}


class CLIError(Exception):
    pass


# -- output helpers ----------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if hasattr(obj, "value") and hasattr(obj, "name"):
        return obj.value
    return obj


def _round_floats(obj, digits=10):
    if isinstance(obj, float):
        return float(f"{obj:.{digits}g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round_floats(v, digits) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _emit(args, text: str):
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# -- inputs ------------------------------------------------------------------------------


def load_spec(path) -> kn.KernelSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CLIError(f"cannot read spec {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CLIError(f"spec {path} is not valid JSON: {exc}") from None
    return kn.parse_spec(doc)


def _truncation(args, spec):
    if getattr(args, "truncation", None) is not None:
        if args.truncation < 1:
            raise CLIError("--truncation must be >= 1")
        return args.truncation
    return spec.truncation


def _tolerances(args, spec) -> tuple:
    tol_psd = args.tol_psd if args.tol_psd is not None else float(spec.tolerances.get("psd", pc.DEFAULT_TOL_PSD))
    tol_strict = (
        args.tol_strict if args.tol_strict is not None else float(spec.tolerances.get("strict", pc.DEFAULT_TOL_STRICT))
    )
    if not (tol_psd > 0 and tol_strict > 0):
        raise CLIError("tolerances must be positive")
    return tol_psd, tol_strict


def load_points(args, manifold):
    if args.points and args.sample:
        raise CLIError("give either --points or --sample, not both")
    if args.points:
        m, X = read_points_csv(Path(args.points).read_text())
        if str(m) != str(manifold):
            raise CLIError(f"points file is for {m}, spec is for {manifold}")
        return X
    if args.sample:
        strategy, _, n = args.sample.partition(":")
        if not n:
            raise CLIError("--sample expects STRATEGY:N, e.g. uniform:20")
        return sample_points(manifold, int(n), strategy, args.seed)
    raise CLIError("points required: --points PATH or --sample STRATEGY:N")


def load_values(path) -> np.ndarray:
    rows = [r for r in csv.reader(io.StringIO(Path(path).read_text())) if r and any(c.strip() for c in r)]
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]
    vals = []
    for r in rows:
        if len(r) == 1:
            vals.append(float(r[0]))
        elif len(r) == 2:
            vals.append(complex(float(r[0]), float(r[1])))
        else:
            raise CLIError("data CSV rows need one (real) or two (re,im) columns")
    return np.array(vals)


# -- commands -----------------------------------------------------------------------------


def _run_check(spec: kn.KernelSpec, check: str, args) -> tuple:
    """Return ``(verdict, extra_payload)``."""
    s = spec.scheme
    bound = args.torus_bound
    if check == "pd":
        return pc.pd_convolutional(s), None
    if check == "spd":
        return pc.spd_scheme(s, bound), None
    if check == "psd_submatrix":
        ok = pc.psd_submatrix(s, args.window, args.tol_psd or pc.DEFAULT_TOL_PSD)
        st = Status.PROVEN if ok else Status.DISPROVEN
        return Verdict(st, "psd_submatrix", None if ok else {"kind": "indefinite_window"}, {"window": args.window or s.size}), None
    if check == "dominance":
        rep = pc.uniform_diagonal_dominance(s)
        return rep.verdict, {"dominance": rep.to_dict()}
    if check == "dominance_s":
        if args.s is None:
            raise CLIError("--s is required for the dominance_s check")
        rep = pc.diagonal_dominance_with_s(s, args.s)
        return rep.verdict, {"dominance": rep.to_dict()}
    if check == "ul":
        return pc.spd_via_UL(s), None
    if check == "product_recursion":
        pd = pc.pd_convolutional(s)
        if not pd.proven:
            return Verdict(Status.DISPROVEN, "spd_product_recursion", pd.witness, {}, [pd]), None
        return pc.spd_product_recursion(s.factors[0], s.factors[1], s.support()), None
    raise CLIError(f"unknown check {check!r}")


def cmd_check(args) -> int:
    spec = load_spec(args.spec)
    check = args.check or spec.check
    verdict, extra = _run_check(spec, check, args)
    payload = verdict.to_dict()
    if extra:
        payload.update(extra)
    _emit(args, dumps(payload))
    return _STATUS_EXIT[verdict.status]


def _matrix_csv(K: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in np.asarray(K, dtype=complex):
        w.writerow([repr(float(v)) for z in row for v in (z.real, z.imag)])
    return buf.getvalue()


def cmd_gram(args) -> int:
    spec = load_spec(args.spec)
    X = load_points(args, spec.manifold)
    tol_psd, tol_strict = _tolerances(args, spec)
    G = gi.assemble_gram(spec.scheme, X, _truncation(args, spec))
    rep = gi.verify_pd(G, tol_psd, tol_strict)
    if args.output == "csv":
        _emit(args, _matrix_csv(G.entries))
        sys.stderr.write(dumps(rep.to_dict()))
    else:
        K = np.asarray(G.entries, dtype=complex)
        _emit(args, dumps({"spectrum": rep.to_dict(), "tail_bound": G.tail_bound,
                           "matrix": {"re": K.real, "im": K.imag}}))
    return EXIT_OK


def cmd_interpolate(args) -> int:
    spec = load_spec(args.spec)
    X = load_points(args, spec.manifold)
    if not args.data:
        raise CLIError("--data CSV with one value per point is required")
    f = load_values(args.data)
    tol_psd, tol_strict = _tolerances(args, spec)
    try:
        interp = gi.fit(spec.scheme, X, f, args.regularization, _truncation(args, spec), tol_psd, tol_strict)
    except gi.SingularSystemError as exc:
        sys.stderr.write(dumps({"error": str(exc), "spectrum": exc.report.to_dict()}))
        return EXIT_ERROR
    Z = X
    if args.eval_points:
        _, Z = read_points_csv(Path(args.eval_points).read_text())
    vals = gi.evaluate(interp, Z)
    resid = float(np.max(np.abs(gi.evaluate(interp, X) - f)))
    if args.output == "json":
        _emit(args, dumps({"coefficients": np.asarray(interp.coefficients, dtype=complex),
                           "evaluations": np.asarray(vals, dtype=complex),
                           "max_residual": resid, "spectrum": interp.report.to_dict()}))
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "index", "re", "im"])
        for kind, arr in (("coefficient", interp.coefficients), ("evaluation", vals)):
            for i, z in enumerate(np.asarray(arr, dtype=complex)):
                w.writerow([kind, i, repr(float(z.real)), repr(float(z.imag))])
        _emit(args, buf.getvalue())
        sys.stderr.write(f"max residual at sites: {resid:.3e}\n")
    return EXIT_OK


def cmd_witness(args) -> int:
    spec = load_spec(args.spec)
    s = spec.scheme
    w = gi.scheme_witness(s, args.seed)
    if w is None:
        _emit(args, dumps({"witness": None, "reason": "support passes the necessary conditions or no geometry"}))
        return EXIT_UNKNOWN
    q, scale = w.residual(s, _truncation(args, spec))
    ok = abs(q) <= 1e-9 * scale
    payload = {
        "plan": w.plan,
        "quadratic_form": q,
        "scale": scale,
        "verified": ok,
        "points_csv": write_points_csv(s.manifold, w.points),
        "coefficients": np.asarray(w.coefficients, dtype=complex),
    }
    if args.out:
        base = Path(args.out)
        base.with_suffix(".points.csv").write_text(payload["points_csv"])
        buf = io.StringIO()
        cw = csv.writer(buf, lineterminator="\n")
        cw.writerow(["re", "im"])
        for z in np.asarray(w.coefficients, dtype=complex):
            cw.writerow([repr(float(z.real)), repr(float(z.imag))])
        base.with_suffix(".coefficients.csv").write_text(buf.getvalue())
    _emit(args, dumps(payload))
    return EXIT_OK if ok else EXIT_ERROR


def basis_table(m, levels: int) -> list:
    rows = []
    for k in range(levels):
        c = addition_coefficient(m.jacobi, k)
        p1 = jacobi_at_one(m.jacobi, k)
        try:
            lam = eigenvalue(m, k)
        except NotImplementedError:
            lam = None
        rows.append({"k": k, "eigenvalue": lam, "multiplicity": multiplicity(m, k), "c_k": c, "jacobi_at_one": p1})
    return rows


def cmd_basis(args) -> int:
    if not args.manifold:
        raise CLIError("--manifold FAMILY:D is required")
    fam, _, d = args.manifold.partition(":")
    m = make_manifold(fam, int(d) if d else 2)
    rows = basis_table(m, args.levels)
    if args.output == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        _emit(args, buf.getvalue())
    else:
        _emit(args, dumps({"manifold": m.to_dict(), "levels": rows}))
    return EXIT_OK


# -- oracle harness ------------------------------------------------------------------------


def addition_theorem_check(kmax: int = 20, pairs: int = 100, seed: int = 0) -> dict:
    """Max deviation of the S^2 addition theorem over seeded random pairs."""
    m = make_manifold("sphere", 3)
    X = sample_points(m, pairs, "uniform", seed)
    Y = sample_points(m, pairs, "uniform", seed + 1)
    HX, HY = sphere2_harmonics(kmax, X), sphere2_harmonics(kmax, Y)
    t = np.sum(X * Y, axis=1)
    Z = kn.level_functions(m, kmax + 1, t)
    worst = 0.0
    for k in range(kmax + 1):
        sl = slice(k * k, (k + 1) ** 2)
        lhs = np.sum(HX[:, sl] * np.conj(HY[:, sl]), axis=1)
        worst = max(worst, float(np.max(np.abs(lhs - Z[k]))))
    return {"name": "addition_theorem", "max_deviation": worst, "passed": worst <= 1e-9}


def _fixture_files(directory):
    if directory:
        return sorted(Path(directory).glob("*.json"))
    root = resources.files("spdkernels") / "fixtures"
    return sorted((p for p in root.iterdir() if p.name.endswith(".json")), key=lambda p: p.name)


def run_fixture(path, seed: int, trials: int, n_points: int, bound: int) -> dict:
    name = Path(str(path)).name
    result = {"name": name, "passed": False}
    try:
        doc = json.loads(Path(str(path)).read_text())
        spec = kn.parse_spec(doc)
        expect = doc.get("expect") or {}
        check = spec.check
        ns = argparse.Namespace(torus_bound=bound, window=None, tol_psd=None, s=doc.get("s"))
        verdict, _ = _run_check(spec, check, ns)
    except Exception as exc:  # a corrupted fixture is a failure, not a crash
        result["error"] = f"{type(exc).__name__}: {exc}"
        return result
    result["status"] = verdict.status.value
    ok = True
    if "status" in expect and expect["status"] != verdict.status.value:
        ok = False
        result["mismatch"] = f"expected {expect['status']}"
    if "witness" in expect:
        got = {k: (verdict.witness or {}).get(k) for k in expect["witness"]}
        if got != expect["witness"]:
            ok = False
            result["witness_mismatch"] = got
    s = spec.scheme
    tol_psd = float(spec.tolerances.get("psd", pc.DEFAULT_TOL_PSD))
    tol_strict = float(spec.tolerances.get("strict", pc.DEFAULT_TOL_STRICT))
    if verdict.proven and expect.get("trials", True):
        n = int(expect.get("points", n_points))
        mins = []
        for t in range(trials):
            rep = gi.random_psd_trial(s, n, seed * 1000 + t, truncation=spec.truncation,
                                      tol_psd=tol_psd, tol_strict=tol_strict)
            mins.append(rep.min_eigenvalue / rep.max_diagonal)
            ok = ok and rep.strictly_pd
        result["trials"] = trials
        result["min_relative_eigenvalue"] = min(mins)
    if verdict.disproven and verdict.witness and "plan" in verdict.witness:
        w = gi.witness_from_plan(s.manifold, verdict.witness["plan"], seed)
        if w is None:
            result["witness"] = "not constructible"
        else:
            q, scale = w.residual(s, spec.truncation)
            result["witness_relative_residual"] = abs(q) / scale
            ok = ok and abs(q) <= 1e-9 * scale
    result["passed"] = bool(ok)
    return result


def cmd_oracle(args) -> int:
    results = [addition_theorem_check(seed=args.seed)]
    for path in _fixture_files(args.fixtures):
        results.append(run_fixture(path, args.seed, args.trials, args.trial_points, args.torus_bound))
    summary = {
        "seed": args.seed,
        "passed": all(r["passed"] for r in results),
        "results": results,
    }
    _emit(args, dumps(_round_floats(_jsonable(summary))))
    return EXIT_OK if summary["passed"] else EXIT_ERROR


# -- argument parsing -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="kernel spec JSON")
    common.add_argument("--points", help="points CSV (header: manifold,FAMILY,D)")
    common.add_argument("--sample", help="sampling directive STRATEGY:N")
    common.add_argument("--truncation", type=int)
    common.add_argument("--tol-psd", type=float, dest="tol_psd")
    common.add_argument("--tol-strict", type=float, dest="tol_strict")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--torus-bound", type=int, default=8, dest="torus_bound")
    common.add_argument("--output", choices=["json", "csv"], default="json")
    common.add_argument("--out", help="write output to this path instead of stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="spdkernels", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="run a positive definiteness criterion")
    c.add_argument("--check", choices=["pd", "spd", "psd_submatrix", "dominance", "dominance_s", "ul", "product_recursion"])
    c.add_argument("--window", type=int)
    c.add_argument("--s", type=float)
    c.set_defaults(func=cmd_check)

    sub.add_parser("gram", parents=[common], help="assemble and classify a Gram matrix").set_defaults(func=cmd_gram)

    i = sub.add_parser("interpolate", parents=[common], help="fit an interpolant")
    i.add_argument("--data", help="values CSV, one row per point (value or re,im)")
    i.add_argument("--eval-points", dest="eval_points")
    i.add_argument("--regularization", type=float, default=0.0)
    i.set_defaults(func=cmd_interpolate)

    sub.add_parser("witness", parents=[common], help="build a degeneracy witness").set_defaults(func=cmd_witness)

    b = sub.add_parser("basis", parents=[common], help="tabulate eigendata")
    b.add_argument("--manifold", help="FAMILY:D, e.g. sphere:3")
    b.add_argument("--levels", type=int, default=11)
    b.set_defaults(func=cmd_basis)

    o = sub.add_parser("oracle", parents=[common], help="run the criterion-oracle agreement suite")
    o.add_argument("--fixtures", help="fixture directory (default: shipped fixtures)")
    o.add_argument("--trials", type=int, default=10)
    o.add_argument("--trial-points", type=int, default=30, dest="trial_points")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command in ("check", "gram", "interpolate", "witness") and not args.spec:
        sys.stderr.write("error: --spec is required\n")
        return EXIT_ERROR
    try:
        return args.func(args)
    except kn.SpecError as exc:
        sys.stderr.write(f"error: malformed spec: {exc}\n")
    except (CLIError, ValueError, NotImplementedError, TypeError, OSError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"error: {exc}\n")
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
