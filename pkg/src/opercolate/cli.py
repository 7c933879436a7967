"""Command-line surface: reproducible, scriptable runs of every subsystem.

Exit codes: 0 success, 1 failed verification, 2 bad input, 3 resource cap,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import sys
import time

from . import acceptance, certify, oracle, packing, walk
from .errors import InternalInvariantError, ResourceLimitError, ValidationError
from .records import canonical_json, csv_text, record_hash
from .simulate import (
    SimConfig,
    estimate_martingale,
    estimate_survival,
)
from .vectors import EdgeParams, parse_scalar, parse_vector

EXIT_OK = 0
EXIT_CRITERIA_FAILED = 1
EXIT_VALIDATION = 2
EXIT_RESOURCE = 3
EXIT_INVARIANT = 4


def _vector(text: str, exact: bool | None = None):
    # Fractions in the input route to exact arithmetic automatically.
    if exact is None:
        exact = "/" in text
    return parse_vector(text, exact=exact)


def _emit(args, text=None, csv=None, record=None):
    fmt = getattr(args, "format", "text")
    if fmt == "text":
        out = text if text is not None else canonical_json(record)
    elif fmt == "csv":
        if csv is None:
            raise ValidationError("this subcommand has no CSV form")
        out = csv
    else:
        if record is None:
            raise ValidationError("this subcommand has no machine-record form")
        out = canonical_json(record)
    output = getattr(args, "output", None)
    if output:
        with open(output, "w", encoding="utf-8") as handle:
            handle.write(out)
    else:
        sys.stdout.write(out if out.endswith("\n") else out + "\n")
    return EXIT_OK


def _cmd_lambda(args):
    q = _vector(args.q)
    series = walk.lambda_truncated(q.as_floats(), args.N, args.m)
    record = series.to_record()
    lines = [
        f"collision series up to N = {series.N} for q = {args.q}",
        f"  partial sum  = {series.partial_sum()!r}",
        f"  tail bound   = "
        + ("unbounded" if series.tail_bound is None else repr(series.tail_bound)),
        f"  total upper  = "
        + ("unbounded" if series.certified_total() is None
           else repr(series.certified_total())),
    ]
    if args.m >= 4:
        bound = walk.lambda_qstar_bound(args.m)
        record["qstar_bound"] = bound.to_record()
        lines.append(
            f"  packed-vector closed form at m = {args.m}: "
            f"total {bound.total!r} (budget 10/m = {bound.budget!r})"
        )
    return _emit(
        args,
        text="\n".join(lines),
        csv=csv_text(("n", "value"), series.csv_rows()),
        record=record,
    )


def _cmd_tau(args):
    q = _vector(args.q)
    dist = walk.tau_dist(q, args.M)
    total = sum(float(p) for p in dist.probs)
    text = "\n".join(
        [f"first-meeting distribution up to M = {args.M} for q = {args.q}"]
        + [f"  P(tau = {m}) = {float(p)!r}" for m, p in dist.csv_rows()]
        + [f"  cumulative = {total!r}"]
    )
    return _emit(
        args,
        text=text,
        csv=csv_text(("n", "value"), dist.csv_rows()),
        record=dist.to_record(),
    )


def _cmd_collide(args):
    q = _vector(args.q)
    terms = walk.collision_series(q.as_floats(), args.N)
    record = {
        "kind": "collision-series",
        "q": [float(e) for e in q.as_floats().entries],
        "N": args.N,
        "terms": [float(t) for t in terms],
    }
    lines = [f"collision probabilities c_1..c_{args.N} for q = {args.q}"]
    lines += [f"  c_{n} = {float(t)!r}" for n, t in enumerate(terms, start=1)]
    if args.check_projection:
        worst = max(walk.projection_check(q, n).diff for n in range(1, args.N + 1))
        record["projection_worst_diff"] = worst
        lines.append(f"projection split worst |left-right| = {worst:.3e}")
    return _emit(
        args,
        text="\n".join(lines),
        csv=csv_text(("n", "value"), list(enumerate(map(float, terms), start=1))),
        record=record,
    )


def _cmd_enumerate(args):
    params = EdgeParams(_vector(args.p, exact=True))
    if args.identity is not None:
        report = oracle.verify_partition_identity(params, args.identity, args.cap)
        code = EXIT_OK if report.equal else EXIT_CRITERIA_FAILED
        _emit(args, text=report.to_text(), record=report.to_record())
        return code
    if args.an is not None:
        value = oracle.a_n_exact(params, args.an, args.cap)
        return _emit(
            args,
            text=f"a_{args.an} = {value}",
            record={"kind": "a-n", "n": args.an, "value": str(value)},
        )
    if args.bm is not None:
        value = oracle.b_m_exact(params, args.bm, args.cap)
        return _emit(
            args,
            text=f"b_{args.bm} = {value}",
            record={"kind": "b-m", "m": args.bm, "value": str(value)},
        )
    if args.second_moment is not None:
        direct, recursion = oracle.second_moment_exact(
            params, args.second_moment, args.cap
        )
        equal = direct == recursion
        _emit(
            args,
            text=(
                f"E[W_{args.second_moment}^2] direct    = {direct}\n"
                f"E[W_{args.second_moment}^2] recursion = {recursion}\n"
                f"exact equality: {'yes' if equal else 'NO'}"
            ),
            record={
                "kind": "second-moment",
                "n": args.second_moment,
                "direct": str(direct),
                "recursion": str(recursion),
                "equal": equal,
            },
        )
        return EXIT_OK if equal else EXIT_CRITERIA_FAILED
    raise ValidationError(
        "choose one of --an, --bm, --second-moment, --identity"
    )


def _cmd_pack(args):
    q = _vector(args.q)
    if args.action == "step":
        stepped = packing.pack_step(q, args.m)
        return _emit(
            args,
            text=f"{tuple(float(e) for e in stepped.entries)}",
            csv=csv_text(
                tuple(f"q{i+1}" for i in range(q.d)),
                [tuple(float(e) for e in stepped.entries)],
            ),
            record={
                "kind": "pack-step",
                "result": [float(e) for e in stepped.entries],
            },
        )
    if args.action == "verify":
        report = packing.verify_pack_monotone(q, args.m, args.N)
        code = EXIT_OK if report.passed else EXIT_CRITERIA_FAILED
        _emit(
            args,
            text=(
                f"merged pair {report.pair}: laziness {report.x_before!r} -> "
                f"{report.x_after!r} ({'ok' if report.laziness_ok else 'FAIL'})\n"
                f"worst termwise drop over n <= {args.N}: "
                f"{report.worst_term_drop:.3e} "
                f"({'ok' if report.termwise_ok else 'FAIL'})"
            ),
            record=report.to_record(),
        )
        return code
    full = packing.pack_full(q, args.m)
    return _emit(
        args,
        text="\n".join(
            [f"packed in {full.steps} steps:"]
            + [f"  {tuple(float(e) for e in v.entries)}" for v in full.orbit]
        ),
        csv=csv_text(
            tuple(f"q{i+1}" for i in range(q.d)), full.csv_rows()
        ),
        record=full.to_record(),
    )


def _cmd_check(args):
    if args.isotropic is not None:
        value = certify.isotropic_bound(args.isotropic)
        return _emit(
            args,
            text=f"isotropic critical-parameter upper bound at d = "
            f"{args.isotropic}: {value!r}",
            record={"kind": "isotropic-bound", "d": args.isotropic, "value": value},
        )
    if not args.p:
        raise ValidationError("--p is required unless --isotropic is given")
    p = _vector(args.p, exact=True)
    if args.subcritical:
        cert = certify.check_subcritical(p)
    elif args.numeric:
        cert = certify.numeric_certificate(p, m=args.m, N=args.N)
    else:
        eps = parse_scalar(args.epsilon, exact=True) if args.epsilon else None
        cert = certify.check_theorem1(p, eps)
    _emit(args, text=cert.to_text(), record=cert.to_record())
    return EXIT_OK


def _cmd_simulate(args):
    params = EdgeParams(_vector(args.p, exact=False))
    # Martingale runs need path counts; survival runs may drop to occupancy.
    track_counts = args.mode == "martingale" or not args.occupancy_only
    config = SimConfig(
        params=params,
        max_level=args.levels,
        replicas=args.replicas,
        seed=args.seed,
        track_counts=track_counts,
        memory_cap_bytes=args.memory_cap,
        threads=args.threads,
    )
    start = time.perf_counter()
    if args.mode == "martingale":
        result = estimate_martingale(config)
    else:
        result = estimate_survival(config)
    wall = time.perf_counter() - start
    record = result.to_record()
    record["config"] = config.to_record()
    record["config_sha256"] = record_hash(config.to_record())
    record["wall_seconds"] = wall
    lines = [
        f"{args.mode} run: {args.replicas} replicas to level {args.levels}, "
        f"seed {args.seed} ({wall:.2f}s)"
    ]
    for row in result.csv_rows():
        lines.append(
            f"  level {row[0]:>3}: survival {row[3]:.4f}"
            + ("" if row[1] == "" else f", mean W {row[1]:.5f} +- {row[4]:.5f}")
        )
    return _emit(
        args,
        text="\n".join(lines),
        csv=csv_text(
            ("level", "mean_W", "var_W", "survival_frac", "ci_halfwidth"),
            result.csv_rows(),
        ),
        record=record,
    )


def _cmd_verify_all(args):
    only = set(args.only.split(",")) if args.only else None
    results = acceptance.run_all(only=only)
    for result in results:
        print(result.line())
    bad = [r for r in results if not r.acceptable]
    if bad:
        print(f"{len(bad)} criteria out of order")
        return EXIT_CRITERIA_FAILED
    print(f"all {len(results)} criteria in order")
    return EXIT_OK


def _add_common(parser):
    parser.add_argument(
        "--format",
        choices=("text", "csv", "machine-record"),
        default="text",
        help="output format",
    )
    parser.add_argument("--output", help="write output to this path instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opercolate",
        description=(
            "Verification and simulation toolkit for anisotropic oriented "
            "percolation: exact path-pair enumeration, walk collision series "
            "with certified tails, mass packing, percolation certificates, "
            "and seeded Monte Carlo."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_lambda = sub.add_parser(
        "lambda", help="collision series with certified tail bound"
    )
    p_lambda.add_argument("--q", required=True, help="step-law vector, e.g. 4x0.25")
    p_lambda.add_argument("--N", type=int, default=200, help="truncation level")
    p_lambda.add_argument(
        "--m", type=int, default=0,
        help="cap parameter for the tail certificate (0 = no certificate)",
    )
    _add_common(p_lambda)
    p_lambda.set_defaults(func=_cmd_lambda)

    p_tau = sub.add_parser("tau", help="first-meeting-time distribution")
    p_tau.add_argument("--q", required=True)
    p_tau.add_argument("--M", type=int, default=50)
    _add_common(p_tau)
    p_tau.set_defaults(func=_cmd_tau)

    p_collide = sub.add_parser(
        "collide", help="collision probabilities and the projection split"
    )
    p_collide.add_argument("--q", required=True)
    p_collide.add_argument("--N", type=int, default=30)
    p_collide.add_argument(
        "--check-projection", action="store_true",
        help="also verify the two-block split at every n <= N",
    )
    _add_common(p_collide)
    p_collide.set_defaults(func=_cmd_collide)

    p_enum = sub.add_parser(
        "enumerate", help="exact rational path-pair enumeration"
    )
    p_enum.add_argument("--p", required=True, help="edge probabilities (exact)")
    p_enum.add_argument("--an", type=int, help="same-endpoint pair weight at level n")
    p_enum.add_argument("--bm", type=int, help="first-meeting pair weight at level m")
    p_enum.add_argument(
        "--second-moment", type=int, help="E[W_n^2] both ways at level n"
    )
    p_enum.add_argument(
        "--identity", type=int, metavar="M",
        help="verify the composition identity at level M",
    )
    p_enum.add_argument(
        "--cap", type=int, default=oracle.DEFAULT_PAIR_CAP,
        help="refuse enumerations beyond this many ordered pairs",
    )
    _add_common(p_enum)
    p_enum.set_defaults(func=_cmd_enumerate)

    p_pack = sub.add_parser("pack", help="mass-packing transform")
    p_pack.add_argument("--q", required=True)
    p_pack.add_argument("--m", type=int, required=True)
    p_pack.add_argument(
        "--action", choices=("full", "step", "verify"), default="full"
    )
    p_pack.add_argument("--N", type=int, default=30, help="termwise check depth")
    _add_common(p_pack)
    p_pack.set_defaults(func=_cmd_pack)

    p_check = sub.add_parser("check", help="percolation certificates")
    p_check.add_argument("--p", help="edge probabilities")
    p_check.add_argument(
        "--epsilon", help="margin for the closed-form route (default mu - 1)"
    )
    p_check.add_argument(
        "--numeric", action="store_true",
        help="use the computed collision sum against mu - 1",
    )
    p_check.add_argument("--m", type=int, default=4)
    p_check.add_argument("--N", type=int, default=500)
    p_check.add_argument(
        "--subcritical", action="store_true", help="only run the mu < 1 test"
    )
    p_check.add_argument(
        "--isotropic", type=int, metavar="D",
        help="print the isotropic upper bound at dimension D",
    )
    _add_common(p_check)
    p_check.set_defaults(func=_cmd_check)

    p_sim = sub.add_parser("simulate", help="seeded Monte Carlo cluster growth")
    p_sim.add_argument("--p", required=True)
    p_sim.add_argument("--levels", type=int, default=20)
    p_sim.add_argument("--replicas", type=int, default=1000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--mode", choices=("survival", "martingale"),
                       default="survival")
    p_sim.add_argument("--threads", type=int, default=None)
    p_sim.add_argument(
        "--occupancy-only", action="store_true",
        help="track occupancy bits instead of path counts (survival mode)",
    )
    p_sim.add_argument(
        "--memory-cap", type=int, default=2 << 30,
        help="frontier memory cap in bytes",
    )
    _add_common(p_sim)
    p_sim.set_defaults(func=_cmd_simulate)

    p_verify = sub.add_parser(
        "verify-all", help="run the full release-gate verification suite"
    )
    p_verify.add_argument(
        "--only", help="comma-separated criterion ids (e.g. 1,3,9a)"
    )
    p_verify.set_defaults(func=_cmd_verify_all)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except ResourceLimitError as err:
        print(f"resource limit: {err}", file=sys.stderr)
        return EXIT_RESOURCE
    except InternalInvariantError as err:
        print(f"internal invariant violated: {err}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
