"""``shelterscan`` command line: batch reports over a shelter access CSV."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import date
from pathlib import Path
from typing import Sequence

from . import __version__
from .cluster import client_features, cluster_population
from .detect import (
    ConfigurationError,
    TestKind,
    WindowTest,
    as_timelines,
    eval_definition,
    load_definitions,
    resolve_definition,
    single_test_definition,
)
from .impact import (
    ContractViolation,
    aggregate_impact,
    cohort_stats,
    referral_impact,
    referrals_per_month,
    under_radar_report,
)
from .ingest import (
    DEFAULT_CENSOR_END,
    DEFAULT_CENSOR_START,
    DEFAULT_MAX_BAD_FRACTION,
    CensorBounds,
    FormatError,
    load_timelines,
)
from .report import (
    Table,
    cluster_tables,
    cohort_table,
    compare_table,
    grid_table,
    render,
    under_radar_table,
)
from .search import DEFAULT_COUNTS, DEFAULT_FRACTIONS, DEFAULT_WINDOWS, GridSpec, Objective, run_grid
from .synth import SynthConfig, events_to_csv, generate_population, load_spec
from .timeline import DEFAULT_GAP_DAYS, GapPolicy

logger = logging.getLogger("shelterscan")

DATA_DIR_ENV = "SHELTERSCAN_DATA_DIR"
COMPARE_DEFAULT = ("GoA", "GoC", "RAPID")


class CommandError(RuntimeError):
    """Bad paths, flags or inputs; reported with exit code 2."""


@dataclass
class RunConfig:
    input: str | None = None
    gap_days: int = DEFAULT_GAP_DAYS
    censor: bool = True
    censor_start: date = DEFAULT_CENSOR_START
    censor_end: date = DEFAULT_CENSOR_END
    max_bad_fraction: float = DEFAULT_MAX_BAD_FRACTION
    definitions: list[str] = field(default_factory=list)
    definitions_file: str | None = None
    format: str = "markdown"
    percentile: str = "linear"
    seed: int = 0
    threads: int = 1
    extra: dict[str, object] = field(default_factory=dict)

    def echo(self) -> dict[str, object]:
        d = asdict(self)
        extra = d.pop("extra")
        d.update(extra)
        d["definitions"] = ",".join(self.definitions)
        return d

    @property
    def policy(self) -> GapPolicy:
        return GapPolicy(self.gap_days)


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _iso_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def resolve_input(path: str) -> Path:
    p = Path(path)
    if not p.exists() and not p.is_absolute() and os.environ.get(DATA_DIR_ENV):
        p = Path(os.environ[DATA_DIR_ENV]) / p
    if not p.is_file():
        raise CommandError(f"input file not found: {path}")
    return p


def _load(cfg: RunConfig):
    bounds = CensorBounds(cfg.censor_start, cfg.censor_end)
    return load_timelines(resolve_input(cfg.input), bounds=bounds,
                          max_bad_fraction=cfg.max_bad_fraction, censor=cfg.censor)


def _definitions(cfg: RunConfig, default: Sequence[str]):
    extra = load_definitions(cfg.definitions_file) if cfg.definitions_file else {}
    test = cfg.extra.get("test")
    names = cfg.definitions or ([] if test is not None else list(default))
    specs = [resolve_definition(n, extra) for n in names]
    if test is not None:
        specs.append(single_test_definition(test))
    return specs


def cmd_ingest_stats(cfg: RunConfig) -> str:
    parsed, censored = _load(cfg)
    n_stays = sum(tl.n_stays for tl in censored.timelines.values())
    rows = [
        ["Records", parsed.n_records],
        ["Malformed lines", parsed.n_bad],
        ["Events", len(parsed.events)],
        ["Clients", censored.n_input],
        ["Clients retained", f"{censored.retained}/{censored.n_input} "
                             f"({100 * censored.retained_fraction:.1f}%)"],
        ["Stays (retained clients)", n_stays],
    ]
    notes = [f"first malformed line {parsed.bad_lines[0][0]}: {parsed.bad_lines[0][1]}"] if parsed.bad_lines else []
    return render([Table("Ingestion summary", ["Quantity", "Value"], rows, notes=notes)],
                  cfg.format, "ingest-stats", cfg.echo())


def flagged_cohorts(cfg: RunConfig, timelines, specs):
    population = as_timelines(timelines)
    out = []
    for spec in specs:
        flagged = [tl for tl in population if eval_definition(tl, spec, cfg.policy).referred]
        out.append((spec.name, cohort_stats(flagged, len(population), cfg.policy, cfg.percentile)))
    return out


def cmd_stats(cfg: RunConfig) -> str:
    _, censored = _load(cfg)
    specs = _definitions(cfg, ["RAPID-Chronic", "RAPID-Episodic", "GoC", "GoA"])
    tables = [cohort_table(name, stats) for name, stats in flagged_cohorts(cfg, censored.timelines, specs)]
    return render(tables, cfg.format, "stats", cfg.echo())


def definition_impacts(cfg: RunConfig, timelines, specs):
    population = as_timelines(timelines)
    out = {}
    for spec in specs:
        outcomes = []
        for tl in population:
            decision = eval_definition(tl, spec, cfg.policy)
            if decision.referred:
                outcomes.append(referral_impact(tl, decision.referral_date))
        out[spec.name] = (aggregate_impact(outcomes, len(population)), outcomes)
    return out


def cmd_compare(cfg: RunConfig) -> str:
    _, censored = _load(cfg)
    specs = _definitions(cfg, COMPARE_DEFAULT)
    impacts = definition_impacts(cfg, censored.timelines, specs)
    table = compare_table({name: summary for name, (summary, _) in impacts.items()})
    for name, (_, outcomes) in impacts.items():
        dates = [o.referral_date for o in outcomes]
        try:
            rate = f"{referrals_per_month(dates):.2f}"
        except ContractViolation:
            rate = "n/a"
        table.notes.append(f"{name}: {rate} referrals per month")
    return render([table], cfg.format, "compare", cfg.echo())


def cmd_grid(cfg: RunConfig) -> str:
    _, censored = _load(cfg)
    x = cfg.extra
    kind = TestKind(x["kind"])
    thresholds = x["fractions"] if kind is TestKind.STAY_COUNT else x["counts"]
    spec = GridSpec(kind, tuple(x["windows"]), tuple(thresholds), x["objective"])
    rows = run_grid(censored.timelines, spec, cfg.policy, top=x["top"])
    label = "stays" if kind is TestKind.STAY_COUNT else "episodes"
    return render([grid_table(rows, label, spec.objective)], cfg.format, "grid-search", cfg.echo())


def cmd_cluster(cfg: RunConfig) -> str:
    _, censored = _load(cfg)
    ids, X = client_features(censored.timelines, cfg.policy)
    if len(ids) < cfg.extra["k"]:
        raise CommandError(f"need at least k={cfg.extra['k']} clients, have {len(ids)}")
    rep = cluster_population(X, ids, k=cfg.extra["k"], seed=cfg.seed, restarts=cfg.extra["restarts"])
    return render(cluster_tables(rep), cfg.format, "cluster", cfg.echo())


def cmd_under_radar(cfg: RunConfig) -> str:
    _, censored = _load(cfg)
    specs = _definitions(cfg, ["RAPID"])
    population = as_timelines(censored.timelines)
    flagged = {tl.client_id for tl in population
               if any(eval_definition(tl, s, cfg.policy).referred for s in specs)}
    rep = under_radar_report(population, flagged, cfg.policy, cfg.percentile)
    title = "Clients not identified by " + " or ".join(s.name for s in specs)
    return render(under_radar_table(title, rep), cfg.format, "under-radar", cfg.echo())


def cmd_synth(cfg: RunConfig) -> str:
    spec_path = cfg.extra.get("spec")
    synth_cfg = load_spec(spec_path) if spec_path else SynthConfig()
    events, _ = generate_population(cfg.extra["size"], cfg.seed, synth_cfg)
    return events_to_csv(events)


COMMANDS = {
    "ingest-stats": cmd_ingest_stats,
    "stats": cmd_stats,
    "compare": cmd_compare,
    "grid-search": cmd_grid,
    "cluster": cmd_cluster,
    "under-radar": cmd_under_radar,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shelterscan", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", help=f"events CSV (relative paths also tried under ${DATA_DIR_ENV})")
    common.add_argument("--gap-days", type=int, default=DEFAULT_GAP_DAYS)
    common.add_argument("--censor-start", type=_iso_date, default=DEFAULT_CENSOR_START,
                        help="exclusive lower bound on first stay (default %(default)s)")
    common.add_argument("--censor-end", type=_iso_date, default=DEFAULT_CENSOR_END,
                        help="exclusive upper bound on first stay (default %(default)s)")
    common.add_argument("--no-censor", dest="censor", action="store_false",
                        help="keep every client regardless of first stay date")
    common.add_argument("--max-bad-fraction", type=float, default=DEFAULT_MAX_BAD_FRACTION)
    common.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    common.add_argument("--percentile", choices=("linear", "nearest"), default="linear")
    common.add_argument("--threads", type=int, default=1,
                        help="worker cap; evaluation is currently single-threaded")
    common.add_argument("-o", "--output", help="write report here instead of stdout")

    defs = argparse.ArgumentParser(add_help=False)
    defs.add_argument("--definition", dest="definitions", action="append", default=[],
                      metavar="NAME", help="GoC, GoA, RAPID, RAPID-Chronic, RAPID-Episodic or custom")
    defs.add_argument("--definitions-file", help="TOML file of custom [[definition]] tables")
    defs.add_argument("--kind", choices=("stays", "episodes"))
    defs.add_argument("--window", type=int)
    defs.add_argument("--threshold", type=int)

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest-stats", parents=[common], help="parse/censor summary")
    sub.add_parser("stats", parents=[common, defs], help="cohort tables per definition")
    sub.add_parser("compare", parents=[common, defs], help="definition performance comparison")
    sub.add_parser("under-radar", parents=[common, defs], help="profile clients nobody flags")

    grid = sub.add_parser("grid-search", parents=[common], help="rank window/threshold combinations")
    grid.add_argument("--kind", choices=("stays", "episodes"), default="stays")
    grid.add_argument("--windows", type=_csv_ints, default=list(DEFAULT_WINDOWS))
    grid.add_argument("--fractions", type=_csv_floats, default=list(DEFAULT_FRACTIONS))
    grid.add_argument("--counts", type=_csv_ints, default=list(DEFAULT_COUNTS))
    grid.add_argument("--objective", choices=("stays", "tenure"),
                      help="default: stays for stay grids, tenure for episode grids")
    grid.add_argument("--top", type=int)

    clu = sub.add_parser("cluster", parents=[common], help="k-means archetypes + Hotelling tests")
    clu.add_argument("--k", type=int, default=3)
    clu.add_argument("--seed", type=int, default=0)
    clu.add_argument("--restarts", type=int, default=10)

    syn = sub.add_parser("synth", help="write a seeded synthetic events CSV")
    syn.add_argument("--size", type=int, default=2000)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--spec", help="TOML archetype spec (default: built-in archetypes)")
    syn.add_argument("--out", "-o", dest="output", help="output CSV (default stdout)")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    ns = vars(args)
    cfg = RunConfig()
    for name in ("input", "gap_days", "censor", "censor_start", "censor_end", "max_bad_fraction",
                 "definitions", "definitions_file", "format", "percentile", "seed", "threads"):
        if name in ns:
            setattr(cfg, name, ns[name])
    if cfg.threads < 1:
        raise CommandError("--threads must be >= 1")
    cmd = args.command
    if cmd in ("stats", "compare", "under-radar"):
        triple = (args.kind, args.window, args.threshold)
        if any(v is not None for v in triple):
            if None in triple:
                raise CommandError("--kind, --window and --threshold must be given together")
            cfg.extra["test"] = WindowTest(TestKind(args.kind), args.window, args.threshold)
    elif cmd == "grid-search":
        cfg.extra.update(kind=args.kind, windows=args.windows, fractions=args.fractions,
                         counts=args.counts, objective=args.objective, top=args.top)
    elif cmd == "cluster":
        cfg.extra.update(k=args.k, restarts=args.restarts)
    elif cmd == "synth":
        cfg.extra.update(size=args.size, spec=args.spec)
    return cfg


def run(argv: Sequence[str] | None = None) -> str:
    """Parse ``argv`` and return the report text (library entry point for tests)."""
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](config_from_args(args))


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = COMMANDS[args.command](config_from_args(args))
    except (CommandError, ConfigurationError, ContractViolation, FormatError, OSError, ValueError) as exc:
        print(f"shelterscan {args.command}: error: {exc}", file=sys.stderr)
        return 2
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
