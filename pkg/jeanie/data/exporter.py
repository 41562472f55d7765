import csv
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

from jeanie.config import format_float
from jeanie.data.models import EvaluationReport
from jeanie.data.store_utils import save_json_atomic
from jeanie.errors import DataFileError, InvalidArgument
from jeanie.logging import logger

REPORT_COLUMNS = ["episode_id", "predicted", "truth", "d_pos_mean", "d_neg_min"]
PLOT_COLUMNS = ["x", "y", "series"]

PlotPoint = Tuple[float, float, str]


# ============================================================
# 결과 내보내기
# ============================================================
class ReportExporter:
    """CSV/JSON artifacts for evaluation runs and sweeps."""

    @staticmethod
    def _open(path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, 'w', encoding='utf-8-sig', newline='')

    @staticmethod
    def export_report_csv(report: EvaluationReport, path: Path) -> Path:
        with ReportExporter._open(path) as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(REPORT_COLUMNS)
            for row in report.rows:
                writer.writerow([
                    row.episode_id,
                    row.predicted,
                    row.truth,
                    format_float(row.d_pos_mean),
                    format_float(row.d_neg_min),
                ])
        logger.info("Exported %s report rows to %s", len(report.rows), path)
        return path

    @staticmethod
    def export_plotdata_csv(points: Iterable[PlotPoint], path: Path) -> Path:
        rows = list(points)
        with ReportExporter._open(path) as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(PLOT_COLUMNS)
            for x, y, series in rows:
                writer.writerow([format_float(x), format_float(y), series])
        logger.info("Exported %s plot points to %s", len(rows), path)
        return path

    @staticmethod
    def export_loss_trace(trace: Sequence[float], path: Path) -> Path:
        with ReportExporter._open(path) as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(["step", "loss"])
            for step, value in enumerate(trace):
                writer.writerow([step, format_float(value)])
        logger.info("Exported %s loss values to %s", len(trace), path)
        return path


def running_accuracy(report: EvaluationReport, series: str) -> List[PlotPoint]:
    points: List[PlotPoint] = []
    hits = 0
    for index, row in enumerate(report.rows, start=1):
        hits += int(row.correct)
        points.append((float(index), hits / index, series))
    return points


def emit_report(
    report: EvaluationReport,
    out_dir: Path,
    plot_points: Optional[Iterable[PlotPoint]] = None,
    series: str = 'accuracy',
) -> Tuple[Path, Path]:
    """Write report.csv, plotdata.csv and summary.json into ``out_dir``."""
    if not report.rows:
        raise InvalidArgument("cannot emit an empty evaluation report")
    points = list(plot_points) if plot_points is not None else running_accuracy(report, series)
    report_path = ReportExporter.export_report_csv(report, out_dir / 'report.csv')
    plot_path = ReportExporter.export_plotdata_csv(points, out_dir / 'plotdata.csv')
    summary = report.summary()
    summary['accuracy'] = float(format_float(report.accuracy))
    summary['stderr'] = float(format_float(report.stderr))
    summary_path = out_dir / 'summary.json'
    if not save_json_atomic(summary_path, summary, 'summary'):
        raise DataFileError(str(summary_path), OSError("could not write summary"))
    return report_path, plot_path


__all__ = ["PLOT_COLUMNS", "REPORT_COLUMNS", "ReportExporter", "emit_report", "running_accuracy"]
