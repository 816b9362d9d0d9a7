from __future__ import annotations

import numpy as np

from ..dataset import DataMatrix, rows_at_least
from ..exceptions import InvalidArgumentError, NoSupportError
from ..graph import UndirectedGraph
from ..patterns import Pattern, model_pattern_of


def qualifying_block(data: DataMatrix, s: Pattern, g: UndirectedGraph, min_rows: int = 1):
    """Scope indices, qualifying row indices and the value block for ``s``.

    Qualifying rows observe every variable in ``s`` and its neighbors.
    """
    if s.d != data.d or g.d != data.d:
        raise InvalidArgumentError("pattern, graph and data widths differ")
    required = model_pattern_of(g, s)
    scope = required.indices
    rows = rows_at_least(data, required)
    if len(rows) < min_rows:
        raise NoSupportError(
            f"connected pattern {s}: {len(rows)} rows observe model pattern {required}, "
            f"need {min_rows}",
            patterns=[str(s)],
        )
    return scope, rows, data.values[np.ix_(rows, scope)]


def local_positions(scope, variables) -> list[int]:
    pos = {v: k for k, v in enumerate(scope)}
    try:
        return [pos[int(v)] for v in variables]
    except KeyError as exc:
        raise InvalidArgumentError(f"variable {exc.args[0]} not in scope {tuple(scope)}") from None
