"""Command line front end.

One subcommand per library surface: norm, tower, discriminate, baumslag,
permrep, torus, certify.  Flags are validated before any computation; every
CSV emitted starts with the versioned header comment.  Exit codes: 0 success,
1 usage (bad flags, unreadable input, mismatched contexts), 2 resource and
convergence limits, 3 violated invariants (a counterexample signal, a failed
injectivity check).

Randomized subcommands take an explicit --seed or --seeds; nothing reads
entropy at run time, so identical flag sets give byte identical output.
--threads caps worker parallelism and never changes results; the present
implementation computes on a single thread regardless of the value.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .algebra import TERM_CAP, parse_element
from .baumslag import (SearchBounds, exhaustive_sweep, search_counterexamples,
                       search_report_csv)
from .errors import (ContextMismatchError, InvariantViolationError,
                     NonConvergenceError, SizeLimitError, UsageError,
                     ZeroElementError)
from .normbracket import bracket_report, sandwich
from .permrep import experiment_csv, strong_convergence_experiment
from .pipeline import (CSV_VERSION, FIT_RADII, M_WORK, certificate_text,
                       certify, write_certificate)
from .torus import GRID_CAP, klein_norm, parse_klein, parse_zr, zr_norm
from .tower import (degree, discriminating_hom, parse_tower, preset_genus2,
                    preset_z2)
from .words import BALL_CAP, Basis, format_word

_PRESETS = {"genus2": preset_genus2, "z2": preset_z2}

_SEARCH_TRIALS = 10 ** 4
# sweep bounds shrink because the k range is enumerated, not sampled
_SWEEP_U, _SWEEP_B, _SWEEP_K = 3, 4, 60
_SEARCH_U, _SEARCH_B, _SEARCH_K = 4, 6, 400


@dataclass(frozen=True)
class RunConfig:
    """One invocation's validated flag set.

    Fields not used by the active subcommand keep their defaults; validate()
    checks only what the subcommand will read, and runs before anything is
    parsed or computed.
    """

    subcommand: str
    threads: Optional[int] = None
    out: Optional[str] = None
    basis: Optional[str] = None
    element: Optional[str] = None
    elements: Optional[str] = None
    tower: Optional[str] = None
    doublings: int = 8
    ratio: float = 1.0
    engine: str = "auto"
    radius: Optional[int] = None
    epsilon: Optional[float] = None
    tight: bool = False
    grid: Optional[int] = None
    refinements: int = 3
    klein: bool = False
    seed: Optional[int] = None
    seeds: tuple = ()
    schedule: tuple = (100, 400, 1600)
    trials: Optional[int] = None
    variant: Optional[str] = None
    sweep: bool = False
    n_max: int = 3
    u_len_max: Optional[int] = None
    b_len_max: Optional[int] = None
    k_max: Optional[int] = None
    tol: float = 1e-9
    max_iters: int = 10000
    m_work: int = M_WORK
    fit_radii: tuple = FIT_RADII
    term_cap: int = TERM_CAP
    ball_cap: int = BALL_CAP
    grid_cap: int = GRID_CAP

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace) -> "RunConfig":
        return cls(**vars(ns))

    def validate(self) -> None:
        if self.threads is not None and self.threads < 1:
            raise UsageError("--threads must be at least 1")
        for cap in ("term_cap", "ball_cap", "grid_cap"):
            if getattr(self, cap) < 1:
                raise UsageError(f"--{cap.replace('_', '-')} must be positive")
        sub = self.subcommand
        if sub == "norm":
            if self.doublings < 1:
                raise UsageError("--doublings must be at least 1")
            if self.ratio < 1.0:
                raise UsageError("--ratio must be at least 1")
        elif sub == "discriminate":
            if self.radius is None or self.radius < 1:
                raise UsageError("--radius must be a positive integer")
        elif sub == "baumslag":
            if self.sweep:
                if self.seed is not None:
                    raise UsageError("--sweep is exhaustive; drop --seed")
                if self.trials is not None:
                    raise UsageError("--sweep is exhaustive; drop --trials")
            else:
                if self.seed is None:
                    raise UsageError("--seed is required (no entropy default)")
                if self.seed < 0:
                    raise UsageError("--seed must be nonnegative")
                if self.trials is not None and self.trials < 0:
                    raise UsageError("--trials must be nonnegative")
            if self.n_max < 0:
                raise UsageError("--n-max must be nonnegative")
            for name in ("u_len_max", "b_len_max", "k_max"):
                v = getattr(self, name)
                if v is not None and v < 0:
                    raise UsageError(f"--{name.replace('_', '-')} must be nonnegative")
        elif sub == "permrep":
            if not self.seeds:
                raise UsageError("--seeds is required (no entropy default)")
            if any(s < 0 for s in self.seeds):
                raise UsageError("--seeds entries must be nonnegative")
            if not self.schedule or any(n < 2 for n in self.schedule):
                raise UsageError("--schedule entries must be at least 2")
            if self.radius is None or self.radius < 1:
                raise UsageError("--radius must be a positive integer")
            if self.tol <= 0:
                raise UsageError("--tol must be positive")
            if self.max_iters < 1:
                raise UsageError("--max-iters must be at least 1")
        elif sub == "torus":
            if self.grid is None or self.grid < 1:
                raise UsageError("--grid must be a positive integer")
            if self.refinements < 0:
                raise UsageError("--refinements must be nonnegative")
        elif sub == "certify":
            if self.radius is None or self.radius < 1:
                raise UsageError("--radius must be a positive integer")
            if self.epsilon is None or self.epsilon <= 0:
                raise UsageError("--epsilon must be positive")
            if self.m_work < 1:
                raise UsageError("--m-work must be at least 1")
            if not self.fit_radii or any(r < 1 for r in self.fit_radii):
                raise UsageError("--fit-radii needs positive integers")


def _csv_ints(text: str) -> tuple:
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma separated integers, got {text!r}") from None


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _load_tower(arg: str):
    if arg.startswith("preset:"):
        name = arg.split(":", 1)[1]
        if name not in _PRESETS:
            known = ", ".join(sorted(_PRESETS))
            raise UsageError(f"unknown preset {name!r} (have: {known})")
        return _PRESETS[name]()
    return parse_tower(_read_text(arg))


def _need_subgroup(pair):
    tower, Y = pair
    if Y is None:
        raise UsageError("tower has no [subgroup] section")
    return tower, Y


def _element_blocks(text: str) -> list:
    """Blank-line separated element blocks; comment-only blocks are dropped."""
    blocks, cur = [], []
    for raw in text.splitlines():
        if raw.strip():
            cur.append(raw)
        elif cur:
            blocks.append(cur)
            cur = []
    if cur:
        blocks.append(cur)
    kept = ["\n".join(b) for b in blocks
            if any(not ln.strip().startswith("#") for ln in b)]
    return kept


def _cmd_norm(cfg: RunConfig) -> str:
    basis = Basis(tuple(s.strip() for s in cfg.basis.split(",")))
    a = parse_element(basis, _read_text(cfg.element))
    try:
        bracket = sandwich(a, max_doublings=cfg.doublings, target_ratio=cfg.ratio,
                           term_cap=cfg.term_cap, engine=cfg.engine)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"bracket [{bracket.lower!r}, {bracket.upper!r}], "
          f"l1 cap {bracket.l1_cap!r}", file=sys.stderr)
    if bracket.heuristic:
        print("note: matrix coefficients, the upper side is heuristic",
              file=sys.stderr)
    if bracket.truncated:
        print("note: schedule truncated by the term cap", file=sys.stderr)
    return CSV_VERSION + "\n" + bracket_report(bracket)


def _cmd_tower(cfg: RunConfig) -> str:
    tower, Y = _load_tower(cfg.tower)
    lines = [f"base = {','.join(tower.base.names)}",
             f"height = {tower.height}",
             f"degree = {degree(tower)}"]
    for level in tower.levels:
        lines.append("[[level]]")
        lines.append(f"t = {level.t}")
        lines.append(f"u = {format_word(level.u)}")
        lines.append(f"a = {format_word(level.a)}")
    if Y is not None:
        lines.append("[subgroup]")
        for name, gen in zip(Y.names, Y.gens):
            lines.append(f"{name} = {format_word(gen)}")
    return "\n".join(lines) + "\n"


def _cmd_discriminate(cfg: RunConfig) -> str:
    tower, Y = _need_subgroup(_load_tower(cfg.tower))
    h = discriminating_hom(tower, Y, cfg.radius, tight=cfg.tight,
                           ball_cap=cfg.ball_cap)
    lines = [f"radius = {h.certified_radius}",
             f"degree = {degree(tower)}",
             f"m_per_level = {list(h.m_per_level)!r}",
             f"stretch = {h.stretch}"]
    for name in Y.names:
        lines.append("[[image]]")
        lines.append(f"name = {name}")
        lines.append(f"len = {len(h.images[name])}")
    return "\n".join(lines) + "\n"


def _cmd_baumslag(cfg: RunConfig) -> str:
    if cfg.sweep:
        report = exhaustive_sweep(
            cfg.u_len_max if cfg.u_len_max is not None else _SWEEP_U,
            cfg.b_len_max if cfg.b_len_max is not None else _SWEEP_B,
            cfg.k_max if cfg.k_max is not None else _SWEEP_K,
            variant=cfg.variant or "A")
        return (CSV_VERSION + "\nchecked,trivial\n"
                + f"{report.checked},{report.trivial}\n")
    bounds = SearchBounds(
        cfg.n_max,
        cfg.u_len_max if cfg.u_len_max is not None else _SEARCH_U,
        cfg.b_len_max if cfg.b_len_max is not None else _SEARCH_B,
        cfg.k_max if cfg.k_max is not None else _SEARCH_K)
    report = search_counterexamples(
        cfg.seed, bounds,
        cfg.trials if cfg.trials is not None else _SEARCH_TRIALS,
        cfg.variant or "B")
    return CSV_VERSION + "\n" + search_report_csv(report)


def _cmd_permrep(cfg: RunConfig) -> str:
    tower, Y = _need_subgroup(_load_tower(cfg.tower))
    z = parse_element(Basis(Y.names), _read_text(cfg.element))
    report = strong_convergence_experiment(
        tower, Y, z, tuple(cfg.schedule), tuple(cfg.seeds),
        r_for_phi=cfg.radius, tol=cfg.tol, max_iters=cfg.max_iters,
        term_cap=cfg.term_cap)
    print(f"reference upper {report.reference_upper!r}, "
          f"l1 cap {report.l1_cap!r}", file=sys.stderr)
    return CSV_VERSION + "\n" + experiment_csv(report)


def _cmd_torus(cfg: RunConfig) -> str:
    text = _read_text(cfg.element)
    if cfg.klein:
        z = parse_klein(text)
        values = [(q, klein_norm(z, q, cfg.grid_cap))
                  for q in (cfg.grid << j for j in range(cfg.refinements + 1))]
    else:
        z = parse_zr(text)
        values = [(q, zr_norm(z, q, cfg.grid_cap))
                  for q in (cfg.grid << j for j in range(cfg.refinements + 1))]
    lines = [repr(values[0][1]), CSV_VERSION, "q,norm,delta"]
    prev = None
    for q, v in values:
        delta = "" if prev is None else repr(abs(v - prev))
        lines.append(f"{q},{v!r},{delta}")
        prev = v
    return "\n".join(lines) + "\n"


def _cmd_certify(cfg: RunConfig) -> str:
    tower, Y = _need_subgroup(_load_tower(cfg.tower))
    basis = Basis(Y.names)
    blocks = _element_blocks(_read_text(cfg.elements))
    if not blocks:
        raise UsageError(f"no elements found in {cfg.elements}")
    elements = [parse_element(basis, block) for block in blocks]
    cert = certify(tower, Y, cfg.radius, cfg.epsilon, elements,
                   m_work=cfg.m_work, fit_radii=tuple(cfg.fit_radii),
                   term_cap=cfg.term_cap, ball_cap=cfg.ball_cap)
    txt_path, csv_path = write_certificate(cert, cfg.out)
    print(f"wrote {txt_path} and {csv_path}", file=sys.stderr)
    return certificate_text(cert)


_DISPATCH = {
    "norm": _cmd_norm,
    "tower": _cmd_tower,
    "discriminate": _cmd_discriminate,
    "baumslag": _cmd_baumslag,
    "permrep": _cmd_permrep,
    "torus": _cmd_torus,
    "certify": _cmd_certify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="residua",
        description="certified norm brackets and ball injective maps "
                    "for free group towers")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND",
                                required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=os.cpu_count(),
                        help="cap on worker parallelism (default: all cores); "
                             "results never depend on it, and the current "
                             "build computes on a single thread")

    p = sub.add_parser("norm", parents=[common],
                       help="bracket the convolution operator norm of one element",
                       description="Bracket the operator norm of an element "
                                   "by repeated squaring, CSV schedule on "
                                   "standard output.")
    p.add_argument("--basis", required=True,
                   help="comma separated generator names, e.g. a,b")
    p.add_argument("--element", required=True, metavar="FILE",
                   help="element file: one 'RE IM WORD' term per line")
    p.add_argument("--doublings", type=int, default=8,
                   help="squaring stages (default: %(default)s)")
    p.add_argument("--ratio", type=float, default=1.0,
                   help="stop once upper/lower is at or below this "
                        "(default: run all stages)")
    p.add_argument("--engine", choices=("auto", "dict", "radial"),
                   default="auto", help="force the convolution engine")
    p.add_argument("--term-cap", type=int, default=TERM_CAP,
                   help="largest admitted product support")
    p.add_argument("--out", metavar="FILE", help="write the CSV here instead")

    p = sub.add_parser("tower", parents=[common],
                       help="echo a parsed tower descriptor",
                       description="Parse a tower file (or preset) and print "
                                   "its levels, degree, and subgroup.")
    p.add_argument("--tower", required=True, metavar="FILE",
                   help="tower file, or preset:genus2 / preset:z2")
    p.add_argument("--out", metavar="FILE", help="write the report here instead")

    p = sub.add_parser("discriminate", parents=[common],
                       help="build a map certified injective on a ball",
                       description="Build the twisted retraction to the base, "
                                   "verify injectivity exhaustively on the "
                                   "radius r ball, report exponents and "
                                   "stretch.")
    p.add_argument("--tower", required=True, metavar="FILE",
                   help="tower file, or preset:genus2 / preset:z2")
    p.add_argument("--radius", type=int, required=True,
                   help="ball radius to certify")
    p.add_argument("--tight", action="store_true",
                   help="search the smallest top level twist exponent that "
                        "still passes")
    p.add_argument("--ball-cap", type=int, default=BALL_CAP,
                   help="largest admitted ball enumeration")
    p.add_argument("--out", metavar="FILE", help="write the report here instead")

    p = sub.add_parser("baumslag", parents=[common],
                       help="search power identities for counterexamples",
                       description="Seeded random search (or exhaustive n = 0 "
                                   "sweep) over power word instances; a "
                                   "counterexample exits 3.")
    p.add_argument("--seed", type=int, help="search seed (required unless --sweep)")
    p.add_argument("--trials", type=int, help="random instances (default: 10000)")
    p.add_argument("--variant", choices=("A", "B"),
                   help="hypothesis variant (default: B search, A sweep)")
    p.add_argument("--sweep", action="store_true",
                   help="exhaustive n = 0 sweep instead of the random search")
    p.add_argument("--n-max", type=int, default=3,
                   help="largest instance arity (default: %(default)s)")
    p.add_argument("--u-len-max", type=int,
                   help="largest |u| (default: 4 search, 3 sweep)")
    p.add_argument("--b-len-max", type=int,
                   help="largest |b_i| (default: 6 search, 4 sweep)")
    p.add_argument("--k-max", type=int,
                   help="largest |k_i| (default: 400 search, 60 sweep)")
    p.add_argument("--out", metavar="FILE", help="write the CSV here instead")

    p = sub.add_parser("permrep", parents=[common],
                       help="norms of random finite actions against a bracket",
                       description="Push an element through a certified map, "
                                   "bracket the image, then measure the "
                                   "induced operator on random permutation "
                                   "actions over an N schedule.")
    p.add_argument("--tower", required=True, metavar="FILE",
                   help="tower file, or preset:genus2 / preset:z2")
    p.add_argument("--element", required=True, metavar="FILE",
                   help="element over the subgroup generators")
    p.add_argument("--schedule", type=_csv_ints, default=(100, 400, 1600),
                   help="comma separated N values (default: 100,400,1600)")
    p.add_argument("--seeds", type=_csv_ints, required=True,
                   help="comma separated representation seeds (no entropy "
                        "default)")
    p.add_argument("--radius", type=int, default=2,
                   help="certified radius for the reference map; element "
                        "support must fit in half of it (default: %(default)s)")
    p.add_argument("--tol", type=float, default=1e-9,
                   help="power iteration tolerance (default: %(default)s)")
    p.add_argument("--max-iters", type=int, default=10000,
                   help="power iteration cap (default: %(default)s)")
    p.add_argument("--term-cap", type=int, default=TERM_CAP,
                   help="largest admitted product support")
    p.add_argument("--out", metavar="FILE", help="write the CSV here instead")

    p = sub.add_parser("torus", parents=[common],
                       help="division grid norms with refinement",
                       description="Evaluate the grid norm at the requested "
                                   "order, then at doubled orders; prints the "
                                   "base value and a refinement CSV.")
    p.add_argument("--element", required=True, metavar="FILE",
                   help="integer lattice element, or Klein element with --klein")
    p.add_argument("--klein", action="store_true",
                   help="read the element in Klein normal form p,k")
    p.add_argument("--grid", type=int, required=True,
                   help="base grid order q")
    p.add_argument("--refinements", type=int, default=3,
                   help="extra doublings in the table (default: %(default)s)")
    p.add_argument("--grid-cap", type=int, default=GRID_CAP,
                   help="largest admitted point count")
    p.add_argument("--out", metavar="FILE", help="write the output here instead")

    p = sub.add_parser("certify", parents=[common],
                       help="end to end certificate for bounded elements",
                       description="Fit stretch constants, pick the exponent "
                                   "for the requested accuracy, build the "
                                   "working map, and write the certificate "
                                   "text and CSV next to the chosen prefix.")
    p.add_argument("--tower", required=True, metavar="FILE",
                   help="tower file, or preset:genus2 / preset:z2")
    p.add_argument("--radius", type=int, required=True,
                   help="support radius R the elements must fit in")
    p.add_argument("--epsilon", type=float, required=True,
                   help="accuracy budget")
    p.add_argument("--elements", required=True, metavar="FILE",
                   help="unit l1 elements over the subgroup generators, "
                        "blank line separated")
    p.add_argument("--m-work", type=int, default=M_WORK,
                   help="working proxy exponent (default: %(default)s)")
    p.add_argument("--fit-radii", type=_csv_ints, default=FIT_RADII,
                   help="radii for the stretch fit (default: 1,2,3)")
    p.add_argument("--term-cap", type=int, default=TERM_CAP,
                   help="largest admitted product support")
    p.add_argument("--ball-cap", type=int, default=BALL_CAP,
                   help="largest admitted ball enumeration")
    p.add_argument("--out", default="certificate", metavar="PREFIX",
                   help="prefix for the two output files "
                        "(default: %(default)s)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if (exc.code or 0) == 0 else 1
    cfg = RunConfig.from_namespace(ns)
    try:
        cfg.validate()
        payload = _DISPATCH[cfg.subcommand](cfg)
        if cfg.out is not None and cfg.subcommand != "certify":
            Path(cfg.out).write_text(payload, encoding="utf-8")
        else:
            sys.stdout.write(payload)
        return 0
    except (UsageError, ContextMismatchError, ZeroElementError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SizeLimitError, NonConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
