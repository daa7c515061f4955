"""Command-line interface: ``condexp {solve,verify,check-derivatives,density}``.

Exit codes: 0 success/pass, 2 usage or input error, 3 solver non-convergence
or verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from typing import List, Optional

from . import density, functional, solvers
from .errors import ConvergenceError, ValidationError
from .problem_file import ProblemFile, load
from .prob_space import RandomVariable, expectation
from .sigma_algebra import is_measurable

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FAIL = 3


def _float_list(text: str) -> List[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _steps(text: str) -> List[float]:
    try:
        return functional.validate_steps(_float_list(text))
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--space", required=True, help="problem file, or bundled:<name>")
    common.add_argument("--var", default="X", help="variable to condition (default: X)")
    common.add_argument("--sigma", default="G", help="conditioning sigma-algebra (default: G)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write the machine-readable JSON report here")
    common.add_argument("--tol", type=float, help="stopping tolerance for the gradient solver")
    common.add_argument("--timings", action="store_true", help="include timings in the JSON report")

    parser = argparse.ArgumentParser(prog="condexp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="compute E(X|G)")
    p.add_argument("--method", choices=solvers.METHODS, default="oracle")
    p.add_argument("--step-policy", choices=("jacobi", "fixed"), default="jacobi")
    p.add_argument("--eta", type=float, help="fixed step size (default 1/max P(atom))")
    p.add_argument("--max-iter", type=_positive_int, default=10_000)
    p.add_argument("--init", choices=("zero", "unconditional_mean"), default="zero")
    p.add_argument("--basis", help="comma-separated variable names used as projection basis")
    p.add_argument("--verify", action="store_true", help="append a verification section")
    p.add_argument("--samples", type=_nonneg_int, default=100)

    p = sub.add_parser("verify", parents=[common], help="check the identities characterizing E(X|G)")
    p.add_argument("--claimed", help="variable name or comma-separated values to verify as E(X|G)")
    p.add_argument("--samples", type=_nonneg_int, default=100)
    p.add_argument("--fine", help="finer sigma-algebra for the tower check")

    p = sub.add_parser("check-derivatives", parents=[common], help="finite-difference checks of T and J")
    p.add_argument("--directions", type=_positive_int, default=20)
    p.add_argument("--steps", type=_steps, default=list(functional.DEFAULT_STEPS))

    p = sub.add_parser("density", parents=[common], help="staircase and truncation traces")
    p.add_argument("--k-max", type=_positive_int, default=10)
    p.add_argument("--schedule", type=_float_list, default=[1.0, 10.0, 100.0, 1000.0])
    return parser


class _Context:
    def __init__(self, args):
        self.args = args
        self.problem: ProblemFile = load(args.space)
        self.space = self.problem.space()
        self.x = self.problem.variable(args.var)
        self.g = self.problem.sigma(args.sigma)
        if self.g.space_size != self.space.size:
            raise ValidationError("sigma-algebra and space sizes differ")
        self.timings = {}
        self.report = {
            "command": args.command,
            "problem": self.problem.to_dict(),
            "summary": {
                "outcomes": self.space.size,
                "variable": args.var,
                "sigma": args.sigma,
                "atoms": [list(a) for a in self.g.atoms],
                "atom_probabilities": self.g.atom_probabilities(self.space).tolist(),
                "expectation": expectation(self.space, self.x),
            },
            "seed": args.seed,
            "notes": [solvers.NULL_CONVENTION],
        }

    def timed(self, key, fn, *a, **kw):
        start = time.perf_counter()
        try:
            return fn(*a, **kw)
        finally:
            self.timings[key] = time.perf_counter() - start

    def gradient_config(self, **kw) -> solvers.GradientConfig:
        if self.args.tol is not None:
            kw["tolerance"] = self.args.tol
        return solvers.GradientConfig(**kw)

    def finish(self, code: int) -> int:
        if self.timings:
            print("timings: " + ", ".join(f"{k} {v * 1e3:.2f} ms" for k, v in self.timings.items()))
        if self.args.timings:
            self.report["timings"] = self.timings
        if self.args.out:
            with open(self.args.out, "w", encoding="utf-8") as fh:
                fh.write(dumps(self.report))
        return code


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _solution_dict(ctx: _Context, result: solvers.CondExpResult) -> dict:
    probs = ctx.g.atom_probabilities(ctx.space)
    return {
        "method": result.method,
        "atoms": [
            {"members": list(a), "probability": float(p), "value": float(v)}
            for a, p, v in zip(ctx.g.atoms, probs, result.atom_values)
        ],
        "xi": result.xi.values.tolist(),
        "iterations": result.iterations,
        "final_gradient_norm": result.final_gradient_norm,
        "converged": result.converged,
        "null_atom_indices": list(result.null_atom_indices),
    }


def _print_atoms(ctx: _Context, result: solvers.CondExpResult):
    probs = ctx.g.atom_probabilities(ctx.space)
    print(f"E({ctx.args.var}|{ctx.args.sigma}) by {result.method}")
    print(f"{'atom':>6}  {'P(atom)':>14}  {'value':>22}  members")
    for j, (a, p, v) in enumerate(zip(ctx.g.atoms, probs, result.atom_values)):
        flag = "  (null atom)" if j in result.null_atom_indices else ""
        print(f"{j:>6}  {p:>14.10g}  {v:>22.17g}  {list(a)}{flag}")
    if result.method == "gradient":
        print(f"iterations: {result.iterations}  final gradient norm: {result.final_gradient_norm:.3e}")


def _print_checks(report: solvers.VerificationReport):
    for c in report.checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"  [{status}] {c.name}: defect {c.max_defect:.3e} (tol {c.tolerance:.1e})")


def _verification(ctx: _Context, xi: RandomVariable, samples: int) -> solvers.VerificationReport:
    a, seed = ctx.args, ctx.args.seed
    rep = solvers.VerificationReport(notes=[solvers.NULL_CONVENTION])
    rep.extend(solvers.verify_defining_property(ctx.space, ctx.g, ctx.x, xi, union_samples=samples, seed=seed))
    rep.extend(solvers.verify_product_identity(ctx.space, ctx.g, ctx.x, xi, samples, seed))
    rep.extend(solvers.dirichlet_check(ctx.space, ctx.g, ctx.x, xi, samples, seed))
    fine = getattr(a, "fine", None)
    if fine:
        rep.extend(solvers.tower_check(ctx.space, ctx.g, ctx.problem.sigma(fine), ctx.x))
    return rep


def cmd_solve(ctx: _Context) -> int:
    a = ctx.args
    basis = None
    if a.basis:
        basis = [ctx.problem.variable(name.strip()) for name in a.basis.split(",")]
    config = ctx.gradient_config(
        step_policy=a.step_policy, eta=a.eta, max_iterations=a.max_iter, initial_point=a.init
    )
    code = EXIT_OK
    try:
        result = ctx.timed("solve", solvers.solve, ctx.space, ctx.g, ctx.x, a.method, config, basis)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        result, code = exc.result, EXIT_FAIL
    ctx.report["method"] = a.method
    ctx.report["solution"] = _solution_dict(ctx, result)
    _print_atoms(ctx, result)
    if a.verify:
        rep = ctx.timed("verify", _verification, ctx, result.xi, a.samples)
        ctx.report["verification"] = rep.to_dict()
        print("verification:")
        _print_checks(rep)
        if not rep.overall_pass and code == EXIT_OK:
            code = EXIT_FAIL
    return ctx.finish(code)


def _claimed(ctx: _Context, text: str) -> RandomVariable:
    if text in ctx.problem.variables:
        return ctx.problem.variable(text)
    try:
        values = [float(s) for s in text.split(",")]
    except ValueError:
        raise ValidationError(f"--claimed {text!r} is neither a variable name nor a list of numbers")
    if len(values) != ctx.space.size:
        raise ValidationError(f"--claimed has {len(values)} values, space has {ctx.space.size}")
    return RandomVariable(values)


def cmd_verify(ctx: _Context) -> int:
    a = ctx.args
    if a.claimed:
        xi = _claimed(ctx, a.claimed)
        source = "claimed"
    else:
        xi = solvers.solve_oracle(ctx.space, ctx.g, ctx.x).xi
        source = "oracle"
    ctx.report["claimed"] = {"source": source, "xi": xi.values.tolist()}
    print(f"verifying {source} E({a.var}|{a.sigma}) with {a.samples} random samples, seed {a.seed}")
    if not is_measurable(ctx.space, ctx.g, xi):
        rep = solvers.VerificationReport(notes=[solvers.NULL_CONVENTION])
        # defect 1 marks "not constant on some atom"
        rep.add("claimed:measurable", 1.0, 0.0)
    else:
        rep = ctx.timed("verify", _verification, ctx, xi, a.samples)
    ctx.report["verification"] = rep.to_dict()
    _print_checks(rep)
    failed = rep.failures()
    if failed:
        print("FAILED: " + ", ".join(c.name for c in failed))
    else:
        print("PASS")
    return ctx.finish(EXIT_OK if rep.overall_pass else EXIT_FAIL)


def cmd_check_derivatives(ctx: _Context) -> int:
    a = ctx.args
    problem = functional.EnergyProblem(ctx.space, ctx.x, ctx.g)
    rep = ctx.timed("check", functional.check_derivatives, problem, a.directions, a.steps, a.seed)
    ctx.report["derivatives"] = rep.to_dict()
    print(f"derivative checks: {a.directions} directions, seed {a.seed}")
    header = "".join(f"{t:>11.0e}" for t in rep.step_sizes)
    print(f"{'formula':<18}{header}   tol      status")
    for name in rep.max_defect:
        row = "".join(f"{d:>11.2e}" for d in rep.per_step[name])
        status = "PASS" if rep.passed[name] else "FAIL"
        print(f"{name:<18}{row}   {rep.tolerance[name]:.0e}  {status}")
    return ctx.finish(EXIT_OK if rep.ok else EXIT_FAIL)


def cmd_density(ctx: _Context) -> int:
    a = ctx.args
    xi = solvers.solve_oracle(ctx.space, ctx.g, ctx.x).xi
    stair = ctx.timed("staircase", density.approximation_trace, ctx.space, ctx.g, xi, a.k_max)
    trunc = ctx.timed("truncation", density.l1_extension_trace, ctx.space, ctx.g, ctx.x, a.schedule)
    ctx.report["density"] = {"staircase": stair.to_dict(), "truncation": trunc.to_dict()}
    print(f"staircase approximation of E({a.var}|{a.sigma})")
    print(f"{'k':>4}  {'L2 error':>12}  {'L1 error':>12}  {'envelope':>12}")
    for k, e2, e1, w in zip(stair.levels, stair.errors_l2, stair.errors_l1, stair.step_width):
        print(f"{k:>4}  {e2:>12.4e}  {e1:>12.4e}  {w:>12.4e}")
    print(f"envelope holds: {stair.bound_holds}")
    print(f"truncation schedule for {a.var}")
    print(f"{'n':>10}  {'|xi_n - xi|_1':>14}  {'|X_n - X|_1':>14}")
    for n, e1, b in zip(trunc.levels, trunc.errors_l1, trunc.step_width):
        print(f"{n:>10g}  {e1:>14.6g}  {b:>14.6g}")
    print(f"contraction bound holds: {trunc.bound_holds}")
    ok = stair.bound_holds and trunc.bound_holds
    return ctx.finish(EXIT_OK if ok else EXIT_FAIL)


COMMANDS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "check-derivatives": cmd_check_derivatives,
    "density": cmd_density,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        ctx = _Context(args)
        return COMMANDS[args.command](ctx)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
