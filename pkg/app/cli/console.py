"""
Логирование и таблицы для командной строки
"""
import logging
import math
from typing import Iterable, Optional, Sequence

import coloredlogs
import pandas as pd
from rich.console import Console
from rich.table import Table

from ..config.settings import settings

LOG_FORMAT = '[%(asctime)s] %(name)s [%(levelname)s] %(message)s'

console = Console()


def setup_logging(quiet: bool = False, level: Optional[str] = None):
    """Configures the root logger once per process"""
    chosen = 'WARNING' if quiet or settings.QUIET else (level or settings.LOG_LEVEL)
    coloredlogs.install(level=chosen.upper(), fmt=LOG_FORMAT, logger=logging.getLogger())


def format_value(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return '-'
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def frame_table(frame: pd.DataFrame, title: str) -> Table:
    """DataFrame → rich Table; floats with six decimals, as written to CSV"""
    table = Table(title=title)
    table.add_column(frame.index.name or '', style='bold')
    for column in frame.columns:
        table.add_column(str(column), justify='right')
    for label, row in frame.iterrows():
        table.add_row(str(label), *[format_value(v) for v in row])
    return table


def rows_table(title: str, columns: Sequence[str], rows: Iterable[Sequence]) -> Table:
    table = Table(title=title)
    for column in columns:
        table.add_column(column)
    for row in rows:
        table.add_row(*[format_value(v) for v in row])
    return table


def show(table: Table):
    console.print(table)
