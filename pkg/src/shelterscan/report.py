"""Plain tables rendered as aligned Markdown or CSV, with a reproducibility header."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from . import __version__
from .cluster import ARCHETYPES, ClusterReport
from .impact import COHORT_METRICS, CohortStats, ImpactSummary, UnderRadarReport
from .search import GridRow, Objective

FORMATS = ("markdown", "csv")


@dataclass
class Table:
    title: str
    columns: list[str]
    rows: list[list[Any]]
    footer: str | None = None
    notes: list[str] = field(default_factory=list)


def _cell(value: Any, fmt: str) -> str:
    if value is None:
        return "" if fmt == "csv" else "-"
    if isinstance(value, float):
        return f"{value:.6g}" if fmt == "csv" else f"{value:.1f}"
    return str(value)


def _pct(frac: float) -> str:
    return f"{100 * frac:.1f}%"


def _coverage(count: int, population: int) -> str:
    frac = count / population if population else 0.0
    return f"{count}/{population} ({_pct(frac)})"


def header_lines(command: str, config: Mapping[str, Any]) -> list[str]:
    lines = [f"shelterscan {__version__} {command}"]
    lines += [f"{k}={config[k]}" for k in sorted(config)]
    return lines


def render(tables: Sequence[Table], fmt: str, command: str, config: Mapping[str, Any]) -> str:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    head = header_lines(command, config)
    out = io.StringIO()
    if fmt == "csv":
        for line in head:
            out.write(f"# {line}\n")
        writer = csv.writer(out, lineterminator="\n")
        for t in tables:
            out.write(f"# table: {t.title}\n")
            for note in t.notes:
                out.write(f"# {note}\n")
            writer.writerow(t.columns)
            for row in t.rows:
                writer.writerow([_cell(v, fmt) for v in row])
            if t.footer:
                out.write(f"# {t.footer}\n")
        return out.getvalue()

    out.write("<!--\n")
    for line in head:
        out.write(f"{line}\n")
    out.write("-->\n")
    for t in tables:
        out.write(f"\n### {t.title}\n\n")
        cells = [[_cell(v, fmt) for v in row] for row in t.rows]
        widths = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(t.columns)]
        out.write("| " + " | ".join(c.ljust(w) for c, w in zip(t.columns, widths)) + " |\n")
        out.write("|" + "|".join("-" * (w + 2) for w in widths) + "|\n")
        for r in cells:
            out.write("| " + " | ".join(c.ljust(w) for c, w in zip(r, widths)) + " |\n")
        if t.footer:
            out.write(f"\n{t.footer}\n")
        for note in t.notes:
            out.write(f"\n{note}\n")
    return out.getvalue()


def cohort_table(title: str, stats: CohortStats) -> Table:
    rows = []
    for name in COHORT_METRICS:
        m = stats.metrics.get(name)
        if m is None:
            rows.append([name, None, None, None])
        elif name == "Usage Percentage":
            rows.append([name, _pct(m.mean), _pct(m.median), _pct(m.p90)])
        else:
            rows.append([name, m.mean, m.median, m.p90])
    footer = f"Coverage: {_coverage(stats.coverage_count, stats.population)}"
    return Table(title, ["Metric", "Mean", "Median", "90th Percentile"], rows, footer)


COMPARE_COLUMNS = [
    "Definition",
    "Clients Identified",
    "Stays Saved per Referral",
    "Tenure Reduction per Referral (days)",
    "Mean Time to ID (days)",
    "Median Time to ID (days)",
]


def compare_table(summaries: Mapping[str, ImpactSummary]) -> Table:
    rows = [
        [name, _coverage(s.identified, s.population), s.mean_stays_saved,
         s.mean_tenure_reduction, s.mean_time_to_id, s.median_time_to_id]
        for name, s in summaries.items()
    ]
    return Table("Definition performance comparison", COMPARE_COLUMNS, rows)


def grid_table(rows: Sequence[GridRow], kind_label: str, objective: Objective) -> Table:
    obj_col = ("Avg. Stays Saved per Referral" if objective is Objective.AVG_STAYS_SAVED
               else "Avg. Tenure Reduction per Referral (days)")
    columns = [f"Window (days)/Threshold ({kind_label})", "N", obj_col, "Median ID Time (days)"]
    body = [[r.ident, _coverage(r.identified, r.population), r.objective, r.median_time_to_id]
            for r in rows]
    return Table(f"Window/threshold performance ({kind_label})", columns, body)


def cluster_tables(rep: ClusterReport) -> list[Table]:
    rank = {name: i for i, name in enumerate(ARCHETYPES)}
    order = sorted(range(rep.k), key=lambda j: (rank.get(rep.names[j], len(rank)), j))
    total = int(rep.counts.sum())
    rows = [
        [rep.names[j], float(rep.raw_means[j, 0]), float(rep.raw_means[j, 1]),
         _coverage(int(rep.counts[j]), total)]
        for j in order
    ]
    summary = Table(
        "Cluster averages",
        ["Group", "Average Total Episodes", "Average Total Stays", "Proportion of Population"],
        rows,
        notes=[f"k={rep.k} seed={rep.seed} restarts={rep.restarts} inertia={rep.inertia:.6g} "
               f"iterations={rep.n_iter} converged={rep.converged} "
               f"init=k-means++ stop=no-assignment-change max_iter=300"],
    )
    tests = []
    for mode, results in (("raw", rep.tests_raw), ("standardized", rep.tests_std)):
        tests += [[mode, f"{t.pair[0]} vs {t.pair[1]}", f"{t.t2:.6g}", f"{t.f:.6g}",
                   f"{t.df[0]},{t.df[1]}", f"{t.p_value:.3g}"] for t in results]
    pvals = Table("Hotelling T-squared pairwise tests",
                  ["Features", "Pair", "T2", "F", "df", "p-value"], tests)
    return [summary, pvals]


def under_radar_table(title: str, rep: UnderRadarReport) -> list[Table]:
    cohort = cohort_table(title, rep.unflagged)
    rows = [
        ["Tenure cutoff (90th percentile, days)", rep.tenure_cutoff],
        ["Long-tenure clients", _coverage(rep.long_tenure_count, rep.population)],
        ["Mean days between episodes", rep.mean_inter_episode_gap],
    ]
    return [cohort, Table("Long-tenure unflagged cohort", ["Quantity", "Value"], rows)]
