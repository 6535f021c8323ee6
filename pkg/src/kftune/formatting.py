"""CSV emission with locale-independent, round-trippable numeric formatting."""

from collections.abc import Iterable, Sequence

import numpy as np


def fmt_cell(value) -> str:
    """Integers verbatim; floats at 17 significant digits with a decimal point."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt_cell(v) for v in row) + "\n")
