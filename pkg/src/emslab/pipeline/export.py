"""Write sweep results: the figure CSV, verdict records, dumps and a markdown summary.

The output structure is::

    <out>/
        <figure>.csv        - one row per grid point and protocol
        verdicts.jsonl      - Monte Carlo verdicts (when simulation is enabled)
        summary.md          - rendered from templates/summary.md.j2
        traces/             - --dump-traces: episode traces as JSON lines
        kernels/            - --dump-kernels: EMS renewal functions u,W,M
        policies/           - --dump-policy: power policies u,J,rho_star
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import TYPE_CHECKING

from jinja2 import Environment, PackageLoader

from emslab import __version__
from emslab.pipeline.sweep import SweepResult

if TYPE_CHECKING:
    from emslab.fading.base import FloatArray
    from emslab.models.sweep import SweepConfig
    from emslab.pipeline.sweep import SweepDumps, SweepRow

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "protocol",
    "param",
    "snr_db",
    "target_T",
    "analytic_T",
    "analytic_eta",
    "mc_eta",
    "mc_eta_se",
    "mc_T",
    "mc_T_se",
    "verdict",
)


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def csv_record(row: SweepRow) -> list[str]:
    point, est = row.point, row.estimate
    return [
        row.protocol,
        _fmt(row.param),
        _fmt(row.snr_db),
        _fmt(row.target_t),
        _fmt(point.avg_decoding_time if point else None),
        _fmt(point.throughput if point else None),
        _fmt(est.throughput if est else None),
        _fmt(est.throughput_se if est else None),
        _fmt(est.mean_tau if est else None),
        _fmt(est.mean_tau_se if est else None),
        row.verdict_text,
    ]


def write_csv(rows: list[SweepRow], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(csv_record(row) for row in rows)
    return path


def write_verdicts(rows: list[SweepRow], path: Path) -> Path:
    """One JSON record per verdict-bearing row, in row order."""
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            if row.verdict is None:
                continue
            record = json.loads(row.verdict.to_json())
            record.update(
                {
                    "grid_index": row.point_index,
                    "target_T": row.target_t,
                    "snr_db": row.snr_db,
                    "verdict": row.verdict_text,
                }
            )
            if row.certified is not None:
                record["certified"] = row.certified
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")
    return path


def _table_csv(table: dict[str, FloatArray], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = list(table)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for values in zip(*(table[c] for c in columns), strict=True):
            writer.writerow(repr(float(v)) for v in values)
    return path


def _stem(row: SweepRow) -> str:
    return f"{row.protocol}_p{row.point_index:03d}"


def write_dumps(rows: list[SweepRow], out: Path, dumps: SweepDumps) -> list[Path]:
    written: list[Path] = []
    for row in rows:
        if dumps.traces and row.traces:
            path = out / "traces" / f"{_stem(row)}.jsonl"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(
                "".join(trace.to_json() + "\n" for trace in row.traces), encoding="utf-8"
            )
            written.append(path)
        if dumps.kernels and row.kernel:
            written.append(_table_csv(row.kernel, out / "kernels" / f"{_stem(row)}.csv"))
        if dumps.policy and row.policy_table:
            written.append(_table_csv(row.policy_table, out / "policies" / f"{_stem(row)}.csv"))
    return written


def render_summary(config: SweepConfig, rows: list[SweepRow], csv_name: str) -> str:
    env = Environment(
        loader=PackageLoader("emslab", "templates"),
        autoescape=False,
        keep_trailing_newline=True,
        trim_blocks=True,
        lstrip_blocks=True,
    )
    template = env.get_template("summary.md.j2")
    return template.render(
        version=__version__,
        figure=config.figure.value,
        channel=config.channel.label,
        protocols=[entry.label for entry in config.protocols],
        monte_carlo=config.monte_carlo,
        csv_name=csv_name,
        rows=rows,
        passed=sum(1 for r in rows if r.verdict_text == "pass"),
        failed=sum(1 for r in rows if r.failed),
        errors=[r for r in rows if r.error is not None],
    )


def write_sweep_outputs(
    config: SweepConfig, rows: list[SweepRow], out: Path, dumps: SweepDumps
) -> SweepResult:
    """Write every sweep artefact under ``out`` and describe them."""
    out.mkdir(parents=True, exist_ok=True)
    csv_path = write_csv(rows, out / f"{config.figure.value}.csv")
    logger.info("Wrote %s", csv_path)

    verdicts_path = None
    if config.monte_carlo.enabled:
        verdicts_path = write_verdicts(rows, out / "verdicts.jsonl")
        logger.info("Wrote %s", verdicts_path)

    dump_paths = write_dumps(rows, out, dumps)
    summary_path = out / "summary.md"
    summary_path.write_text(render_summary(config, rows, csv_path.name), encoding="utf-8")
    logger.info("Wrote %s", summary_path)
    return SweepResult(
        rows=rows,
        csv_path=csv_path,
        summary_path=summary_path,
        verdicts_path=verdicts_path,
        dump_paths=dump_paths,
    )
