import json
import logging
import math
from pathlib import Path
from typing import Any, List, Union

import pandas as pd

from src.config.settings import ConfigConstants
from src.evaluation.metrics import PiOutcome
from src.harness.runner import ExperimentReport
from src.methods.conformal import p_value_rows

logger = logging.getLogger(__name__)

REPORT_COLUMNS = [
    'method', 'dataset', 'replicate', 'coverage', 'mean_width', 'se_coverage', 'se_width',
    'trainings', 'empty_count', 'rmse',
]
OUTCOME_COLUMNS = ['test_index', 'lower', 'upper', 'center', 'target', 'hit', 'width', 'empty']
P_VALUE_COLUMNS = ['test_index', 'candidate', 'source', 'p_value']


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=ConfigConstants.CSV_FLOAT_FORMAT, lineterminator='\n')


def _json_ready(value: Any) -> Any:
    """NaN and infinities become null so the file stays strict JSON."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    return value


def outcome_frame(outcomes: List[PiOutcome]) -> pd.DataFrame:
    records = []
    for i, outcome in enumerate(outcomes):
        interval = outcome.interval
        records.append({
            'test_index': i,
            'lower': interval.lower,
            'upper': interval.upper,
            'center': interval.center,
            'target': outcome.true_target,
            'hit': int(outcome.hit),
            'width': outcome.width,
            'empty': int(outcome.empty),
        })
    return pd.DataFrame.from_records(records, columns=OUTCOME_COLUMNS)


def write_report(report: ExperimentReport, output_dir: Union[str, Path]) -> Path:
    """
    Persist an experiment under `output_dir`.

    Layout:
        {method}/{replicate}.csv          one row per test point
        {method}/{replicate}_p_values.csv candidate p-values, when exported
        report.csv                        one row per method and replicate
        aggregate.json                    per-method summaries

    Args:
        report (ExperimentReport): Finished experiment.
        output_dir (str | Path): Destination directory, created when missing.

    Returns:
        Path: Location of aggregate.json.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    for (label, replicate), outcomes in sorted(report.per_replicate.items()):
        _write_csv(outcome_frame(outcomes), output_dir / label / f"{replicate}.csv")

    for (label, replicate), tables in sorted(report.tables.items()):
        records = [
            (i, candidate, source, p)
            for i, table in enumerate(tables)
            for candidate, source, p in p_value_rows(table)
        ]
        frame = pd.DataFrame.from_records(records, columns=P_VALUE_COLUMNS)
        _write_csv(frame, output_dir / label / f"{replicate}_p_values.csv")

    _write_csv(pd.DataFrame.from_records(report.rows, columns=REPORT_COLUMNS),
               output_dir / ConfigConstants.REPORT_FILE)

    aggregate_path = output_dir / ConfigConstants.AGGREGATE_FILE
    aggregate_path.write_text(
        json.dumps(_json_ready(report.aggregate()), indent=2, sort_keys=True) + '\n', encoding='utf-8'
    )
    logger.info(f"Report written to {output_dir}")
    return aggregate_path


def read_aggregate(path: Union[str, Path]) -> dict:
    return json.loads(Path(path).read_text(encoding='utf-8'))
