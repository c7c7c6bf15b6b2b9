import argparse
import csv
import dataclasses
import io
import logging
import sys
from pathlib import Path

from cantorlab import config as config_file
from cantorlab.approximation import classify_input, load_schedule, theta
from cantorlab.config import Config
from cantorlab.dyadic import ZERO, Dyadic
from cantorlab.errors import CantorlabError, ParseError
from cantorlab.functionals import (
    induced_measure,
    induced_oracle,
    load_functional,
    tt_apply,
    tt_verify,
)
from cantorlab.lattice import (
    boolean_algebra,
    bind_recipe,
    build_set_system,
    chain,
    check_distributive,
    classify_meet_irreducible,
    compute_levels,
    downset_lattice,
    dump_recipe,
    emit_measure_recipe,
    level_groups,
    load_lattice,
    load_recipe,
    lr_profiles,
    verify_set_system_iso,
)
from cantorlab.measures import (
    LEBESGUE,
    MeasureOracle,
    atom_candidates,
    check_additivity,
    convex_sum,
    measure_eval,
    point_mass,
    render_measure_line,
)
from cantorlab.mltests import audit_bounds, capture_profile, check_monotone, load_test
from cantorlab.sequences import Pattern, check_bits, join
from cantorlab.tally import make_phi_A, make_psi, tally_induced_measure, tally_output

log = logging.getLogger(__name__)


def _bits(text: str) -> str:
    return "" if text in ("ε", "-") else check_bits(text)


def _table(rows: list[tuple[str, ...]], header: tuple[str, ...], fmt: str) -> str:
    out = io.StringIO()
    if fmt == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    else:
        out.write("# " + "\t".join(header) + "\n")
        for row in rows:
            out.write("\t".join(row) + "\n")
    return out.getvalue()


def resolve_measure(spec: str, cfg: Config) -> MeasureOracle:
    """`lebesgue`, `point:<pattern>`, `tally:<schedule>`, `tally-psi:<schedule>`,
    `induced:<functional>` or `recipe:<yaml>`."""
    kind, _, arg = spec.partition(":")
    if spec == "lebesgue":
        return LEBESGUE
    if kind == "point":
        return point_mass(Pattern.parse(arg))
    if kind in ("tally", "tally-psi"):
        mode = "psi" if kind == "tally-psi" else "phi"
        schedule = load_schedule(Path(arg))
        return tally_induced_measure(schedule, mode, cfg.guards.decomposition_depth).oracle
    if kind == "induced":
        return induced_oracle(load_functional(arg), cfg.guards.enumeration_bits)
    if kind == "recipe":
        return bind_recipe(load_recipe(Path(arg)), depth_guard=cfg.guards.decomposition_depth)
    raise ParseError(f"unknown measure {spec!r}")


# --- lattice ---


def _lattice_check(args: argparse.Namespace, cfg: Config) -> int:
    lattice = load_lattice(args.file)
    print(f"{lattice.name}: {len(lattice)} elements, top {lattice.top}, bottom {lattice.bottom}")
    verdict = check_distributive(lattice)
    sys.stdout.write(verdict.render())
    return 0 if verdict.ok else 1


def _lattice_levels(args: argparse.Namespace, cfg: Config) -> int:
    lattice = load_lattice(args.file)
    groups = level_groups(lattice, compute_levels(lattice))
    rows = [(str(n), " ".join(group)) for n, group in enumerate(groups, start=1)]
    sys.stdout.write(_table(rows, ("level", "elements"), cfg.output.format))
    split = classify_meet_irreducible(lattice)
    print(f"# meet-reducible: {' '.join(split.reducible)}")
    print(f"# meet-irreducible: {' '.join(split.irreducible)}")
    return 0


def _lattice_sets(args: argparse.Namespace, cfg: Config) -> int:
    system = build_set_system(load_lattice(args.file))
    sys.stdout.write(system.render())
    for label, basics in (
        ("level-two", system.level_two_basics),
        ("meet-irreducible", system.meet_irreducible_basics),
    ):
        print(f"# {label} basics: " + " ".join(f"A{i}@{system.origin[i]}" for i in basics))
    return 0


def _lattice_iso(args: argparse.Namespace, cfg: Config) -> int:
    lattice = load_lattice(args.file)
    report = verify_set_system_iso(lattice, build_set_system(lattice))
    sys.stdout.write(report.render())
    return 0 if report.ok else 1


def _lattice_profiles(args: argparse.Namespace, cfg: Config) -> int:
    lattice = load_lattice(args.file)
    report = lr_profiles(lattice, build_set_system(lattice), cfg.guards.max_basics)
    sys.stdout.write(report.render(cfg.output.format))
    return 0 if report.ok else 1


def _lattice_recipe(args: argparse.Namespace, cfg: Config) -> int:
    recipe = emit_measure_recipe(build_set_system(load_lattice(args.file)))
    for binding in args.bind:
        key, eq, path = binding.partition("=")
        if not eq or key not in recipe["schedules"]:
            raise ParseError(f"bad binding {binding!r}; expected one of "
                             + " ".join(f"{k}=PATH" for k in recipe["schedules"]))
        recipe["schedules"][key] = path
    sys.stdout.write(dump_recipe(recipe))
    return 0


def _lattice_generate(args: argparse.Namespace, cfg: Config) -> int:
    if args.family == "downsets":
        if not args.elements:
            raise ParseError("downsets needs --elements")
        relations = []
        for token in args.relations:
            p, lt, q = token.partition("<")
            if not lt:
                raise ParseError(f"bad relation {token!r}, expected p<q")
            relations.append((p, q))
        lattice = downset_lattice(args.elements, relations, name=args.name or "downsets")
    else:
        if args.size is None:
            raise ParseError(f"{args.family} needs a size")
        lattice = chain(args.size) if args.family == "chain" else boolean_algebra(args.size)
    sys.stdout.write(lattice.to_text())
    return 0


# --- measure ---


def _precision(mu: MeasureOracle, cfg: Config) -> int | None:
    return None if mu.exact else cfg.audit.precision


def _print_values(mu: MeasureOracle, sigmas: list[str], cfg: Config) -> None:
    i = _precision(mu, cfg)
    for text in sigmas:
        sigma = _bits(text)
        print(render_measure_line(sigma, measure_eval(mu, sigma, i or 0), i))


def _measure_eval(args: argparse.Namespace, cfg: Config) -> int:
    _print_values(resolve_measure(args.measure, cfg), args.sigma, cfg)
    return 0


def _measure_audit(args: argparse.Namespace, cfg: Config) -> int:
    mu = resolve_measure(args.measure, cfg)
    report = check_additivity(mu, cfg.audit.depth, cfg.audit.precision)
    sys.stdout.write(report.render())
    return 0 if report.ok else 1


def _measure_atoms(args: argparse.Namespace, cfg: Config) -> int:
    mu = resolve_measure(args.measure, cfg)
    found = atom_candidates(mu, cfg.audit.depth, Dyadic.parse(args.delta), _precision(mu, cfg))
    total = ZERO
    for sigma, mass in found:
        print(f"{sigma or 'ε'}\t{mass}")
        total += mass
    print(f"# {len(found)} candidate(s), mass {total}")
    return 0


def _measure_convex(args: argparse.Namespace, cfg: Config) -> int:
    rho = convex_sum(
        resolve_measure(args.first, cfg),
        resolve_measure(args.second, cfg),
        Dyadic.parse(args.alpha),
    )
    _print_values(rho, args.sigma, cfg)
    return 0


# --- functional ---


def _functional_apply(args: argparse.Namespace, cfg: Config) -> int:
    out = tt_apply(load_functional(args.functional), _bits(args.input))
    print(out or "ε")
    return 0


def _functional_induced(args: argparse.Namespace, cfg: Config) -> int:
    phi = load_functional(args.functional)
    for text in args.sigma:
        sigma = _bits(text)
        value = induced_measure(phi, sigma, cfg.guards.enumeration_bits, args.exhaustive)
        print(render_measure_line(sigma, value, None))
    return 0


def _functional_verify(args: argparse.Namespace, cfg: Config) -> int:
    report = tt_verify(load_functional(args.functional), cfg.audit.depth)
    sys.stdout.write(report.render())
    return 0 if report.ok else 1


# --- tally ---


def _tally_simulate(args: argparse.Namespace, cfg: Config) -> int:
    schedule = load_schedule(args.schedule)
    x = Pattern.parse(args.input)
    if args.mode == "psi":
        output = tally_output(
            make_psi(schedule), join(x, Pattern.parse(args.fill)), args.blocks,
            cfg.guards.stage_budget,
        )
    else:
        output = tally_output(make_phi_A(schedule), x, args.blocks, cfg.guards.stage_budget)
    print("blocks\t" + " ".join(str(b) for b in output.blocks))
    print("output\t" + output.text())
    return 0


def _tally_measure(args: argparse.Namespace, cfg: Config) -> int:
    schedule = load_schedule(args.schedule)
    decomposition = tally_induced_measure(schedule, args.mode, cfg.guards.decomposition_depth)
    atoms = decomposition.atoms(Dyadic(1, cfg.audit.depth))
    rows = [(str(pattern), str(mass)) for pattern, mass in atoms]
    sys.stdout.write(_table(rows, ("pattern", "mass"), cfg.output.format))
    listed = ZERO
    for _, mass in atoms:
        listed += mass
    print(f"# listed {listed} of {decomposition.total_mass}")
    print(f"# trivial: {'yes' if decomposition.is_trivial else 'no'}")
    return 0


def _tally_theta(args: argparse.Namespace, cfg: Config) -> int:
    schedule = load_schedule(args.schedule)
    x = Pattern.parse(args.input)
    for n in range(args.n):
        print(f"{n}\t{theta(schedule, x, n)}")
    print(f"# {classify_input(schedule, x)}")
    return 0


# --- test ---


def _test_bound(args: argparse.Namespace, cfg: Config) -> int:
    test = load_test(args.test)
    if args.kind:
        test = dataclasses.replace(test, kind=args.kind)
    mu = resolve_measure(args.measure, cfg)
    audit = audit_bounds(test, mu, range(args.components), range(args.stages), cfg.audit.precision)
    sys.stdout.write(audit.render())
    monotone = check_monotone(test, range(args.components), max(args.stages - 1, 0))
    for i, s, g in monotone.violations:
        print(f"# not monotone: component {i} drops {g or 'ε'} after stage {s}")
    return 0 if audit.ok and monotone.ok else 1


def _test_capture(args: argparse.Namespace, cfg: Config) -> int:
    profile = capture_profile(
        load_test(args.test), Pattern.parse(args.input), args.n, cfg.guards.stage_budget,
        strict=args.strict,
    )
    sys.stdout.write(profile.render())
    return 0


# --- entry point ---


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for INFO, -vv for DEBUG logging on stderr")
    common.add_argument("--config", type=Path, default=None,
                        help=f"config file (default {config_file.DEFAULT_PATH})")
    common.add_argument("--guard-bits", type=int, help="override [guards] enumeration_bits")
    common.add_argument("--budget", type=int, help="override [guards] stage_budget")
    common.add_argument("--precision", type=int, help="override [audit] precision")
    common.add_argument("--depth", type=int, help="override [audit] depth")
    common.add_argument("--format", choices=("text", "csv"), help="override [output] format")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="cantorlab", description="Computable measures, tally functionals and lattices."
    )
    groups = parser.add_subparsers(dest="group", required=True)

    def leaf(sub, name: str, handler, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(handler=handler)
        return p

    lattice = groups.add_parser("lattice", help="finite lattices and set systems")
    lsub = lattice.add_subparsers(dest="cmd", required=True)
    for name, handler, help in (
        ("check", _lattice_check, "validate a lattice and test distributivity"),
        ("levels", _lattice_levels, "levels and meet-irreducible elements"),
        ("sets", _lattice_sets, "build the set system"),
        ("iso", _lattice_iso, "audit the set system against the lattice"),
        ("profiles", _lattice_profiles, "enumerate derandomization profiles"),
    ):
        leaf(lsub, name, handler, help).add_argument("file", type=Path)
    p = leaf(lsub, "recipe", _lattice_recipe, "emit the uniform-mixture recipe as YAML")
    p.add_argument("file", type=Path)
    p.add_argument("--bind", action="append", default=[], metavar="A0=PATH",
                   help="schedule file for a basic sequence")
    p = leaf(lsub, "generate", _lattice_generate, "write a generated lattice file")
    p.add_argument("family", choices=("chain", "boolean", "downsets"))
    p.add_argument("size", type=int, nargs="?")
    p.add_argument("--elements", nargs="+", default=[])
    p.add_argument("--relations", nargs="*", default=[], metavar="P<Q")
    p.add_argument("--name")

    measure = groups.add_parser("measure", help="computable measures")
    msub = measure.add_subparsers(dest="cmd", required=True)
    p = leaf(msub, "eval", _measure_eval, "evaluate μ on cylinders")
    p.add_argument("measure")
    p.add_argument("--sigma", action="append", required=True)
    p = leaf(msub, "audit", _measure_audit, "additivity audit to --depth")
    p.add_argument("measure")
    p = leaf(msub, "atoms", _measure_atoms, "cylinders at --depth with mass >= --delta")
    p.add_argument("measure")
    p.add_argument("--delta", required=True)
    p = leaf(msub, "convex", _measure_convex, "evaluate α·μ + (1-α)·ν")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--alpha", required=True)
    p.add_argument("--sigma", action="append", required=True)

    functional = groups.add_parser("functional", help="truth-table functionals")
    fsub = functional.add_subparsers(dest="cmd", required=True)
    p = leaf(fsub, "apply", _functional_apply, "output determined by an input prefix")
    p.add_argument("functional")
    p.add_argument("--input", required=True)
    p = leaf(fsub, "induced", _functional_induced, "exact induced measure of cylinders")
    p.add_argument("functional")
    p.add_argument("--sigma", action="append", required=True)
    p.add_argument("--exhaustive", action="store_true", help="enumerate every input, no pruning")
    p = leaf(fsub, "verify", _functional_verify, "audit monotonicity and the use bound")
    p.add_argument("functional")

    tally = groups.add_parser("tally", help="tally functionals driven by schedules")
    tsub = tally.add_subparsers(dest="cmd", required=True)
    p = leaf(tsub, "simulate", _tally_simulate, "blocks and output on an input pattern")
    p.add_argument("schedule", type=Path)
    p.add_argument("--input", required=True)
    p.add_argument("--blocks", type=int, default=5)
    p.add_argument("--mode", choices=("phi", "psi"), default="phi")
    p.add_argument("--fill", default="+1", help="Y for psi mode")
    p = leaf(tsub, "measure", _tally_measure, "atom decomposition of the induced measure")
    p.add_argument("schedule", type=Path)
    p.add_argument("--mode", choices=("phi", "psi"), default="phi")
    p = leaf(tsub, "theta", _tally_theta, "θ values and the case of an input")
    p.add_argument("schedule", type=Path)
    p.add_argument("--input", required=True)
    p.add_argument("--n", type=int, default=5)

    test = groups.add_parser("test", help="staged randomness tests")
    xsub = test.add_subparsers(dest="cmd", required=True)
    p = leaf(xsub, "bound", _test_bound, "audit measure bounds over an (i, s) grid")
    p.add_argument("test")
    p.add_argument("--measure", default="lebesgue")
    p.add_argument("--components", type=int, default=4)
    p.add_argument("--stages", type=int, default=4)
    p.add_argument("--kind", choices=("ml", "schnorr", "generalized"))
    p = leaf(xsub, "capture", _test_capture, "capture stage of each component")
    p.add_argument("test")
    p.add_argument("--input", required=True)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--strict", action="store_true", help="only generators shorter than the stage")
    return parser


def _configure(args: argparse.Namespace) -> Config:
    cfg = config_file.load(args.config)
    guards = {"enumeration_bits": args.guard_bits, "stage_budget": args.budget}
    audit = {"precision": args.precision, "depth": args.depth}

    def given(overrides: dict) -> dict:
        return {k: v for k, v in overrides.items() if v is not None}

    return dataclasses.replace(
        cfg,
        guards=dataclasses.replace(cfg.guards, **given(guards)),
        audit=dataclasses.replace(cfg.audit, **given(audit)),
        output=dataclasses.replace(cfg.output, format=args.format or cfg.output.format),
    )


def _describe(exc: Exception) -> str:
    witness = getattr(exc, "witness", ())
    return f"{exc} (witness: {' '.join(witness)})" if witness else str(exc)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO)[args.verbose] if args.verbose < 2 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s %(message)s")
    try:
        cfg = _configure(args)
    except (TypeError, ValueError) as exc:
        print(f"cantorlab: bad config: {exc}", file=sys.stderr)
        return 2
    log.info("guards %s", cfg.guards)
    try:
        return args.handler(args, cfg)
    except CantorlabError as exc:
        print(f"cantorlab: {_describe(exc)}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"cantorlab: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
