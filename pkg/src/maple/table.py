"""Tables, their markdown wire form, and original-vs-current state tracking.

The markdown dialect is fixed so that serialization is byte-stable:
one space of padding inside pipes, a ``---`` separator cell per column,
no alignment markers, and ``|`` inside cells escaped as ``\\|``.
``parse_markdown`` additionally tolerates alignment colons and missing
outer pipes on input; ``serialize_markdown`` always emits the canonical
form, so ``parse(serialize(t)) == t`` for every valid table.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from maple.errors import ParseError

# Emitted form uses the space variant; the underscore variant is accepted
# on input because both spellings occur in the wild.
NOT_CHANGED = "<NOT CHANGED>"
_NOT_CHANGED_VARIANTS = frozenset({"<NOT CHANGED>", "<NOT_CHANGED>"})

_SEPARATOR_CELL = re.compile(r"^:?-+:?$")


def is_not_changed(block: str) -> bool:
    """True when ``block`` is the no-op table sentinel (either spelling)."""
    return block.strip() in _NOT_CHANGED_VARIANTS


@dataclass(frozen=True)
class Table:
    """A rectangular table of string cells.

    Column names and cells are stripped of surrounding whitespace at
    construction; cells may be empty but column names may not. Newlines
    are rejected because the wire format cannot carry them.
    """

    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...] = field(default=())

    def __init__(self, columns, rows=()):
        cols = tuple(str(c).strip() for c in columns)
        if not cols:
            raise ValueError("table needs at least one column")
        for c in cols:
            if not c:
                raise ValueError("column names must be non-empty after trimming")
        norm_rows = []
        for i, row in enumerate(rows):
            cells = tuple(str(v).strip() for v in row)
            if len(cells) != len(cols):
                raise ValueError(
                    f"row {i} has {len(cells)} cells, expected {len(cols)}"
                )
            norm_rows.append(cells)
        for text in cols + tuple(c for r in norm_rows for c in r):
            if "\n" in text or "\r" in text:
                raise ValueError("newlines are not representable in table cells")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "rows", tuple(norm_rows))

    @property
    def width(self) -> int:
        return len(self.columns)

    @property
    def height(self) -> int:
        return len(self.rows)

    def header_line(self) -> str:
        """First line of the canonical markdown form."""
        return "| " + " | ".join(_escape_cell(c) for c in self.columns) + " |"


@dataclass(frozen=True)
class TableState:
    """Environment for one task: the original table plus the working copy."""

    original: Table
    current: Table
    changed: bool

    @classmethod
    def fresh(cls, table: Table) -> "TableState":
        return cls(original=table, current=table, changed=False)

    def with_current(self, table: Table) -> "TableState":
        return TableState(
            original=self.original, current=table, changed=table != self.original
        )

    def reset(self) -> "TableState":
        """Back to the original table (new reasoning round)."""
        return TableState.fresh(self.original)


def _escape_cell(text: str) -> str:
    return text.replace("|", "\\|")


def _split_cells(line: str) -> list[str]:
    """Split one row line on unescaped pipes; ``\\|`` becomes a literal pipe."""
    cells: list[str] = []
    buf: list[str] = []
    i = 0
    while i < len(line):
        ch = line[i]
        if ch == "\\" and i + 1 < len(line) and line[i + 1] == "|":
            buf.append("|")
            i += 2
        elif ch == "|":
            cells.append("".join(buf))
            buf = []
            i += 1
        else:
            buf.append(ch)
            i += 1
    cells.append("".join(buf))
    if line.startswith("|") and cells and cells[0] == "":
        cells.pop(0)
    if (
        line.endswith("|")
        and not line.endswith("\\|")
        and cells
        and cells[-1] == ""
    ):
        cells.pop()
    return cells


def parse_markdown(text: str) -> Table:
    """Parse a pipe-delimited markdown table.

    Expects a header row, a separator row, and zero or more data rows.
    Cell whitespace is trimmed and escaped pipes are unescaped.

    Raises:
        ParseError: on a missing or malformed separator row, or when a
            data row's width differs from the header's.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if len(lines) < 2:
        raise ParseError("markdown table needs a header row and a separator row")

    header = [c.strip() for c in _split_cells(lines[0])]
    if not header or any(not c for c in header):
        raise ParseError("header row has empty column names")

    separator = [c.strip() for c in _split_cells(lines[1])]
    if len(separator) != len(header) or not all(
        _SEPARATOR_CELL.match(c) for c in separator
    ):
        raise ParseError(f"malformed separator row: {lines[1]!r}")

    rows = []
    for i, line in enumerate(lines[2:]):
        cells = [c.strip() for c in _split_cells(line)]
        if len(cells) != len(header):
            raise ParseError(
                f"ragged row {i}: expected {len(header)} cells, got {len(cells)}"
            )
        rows.append(cells)
    return Table(columns=header, rows=rows)


def serialize_markdown(table: Table) -> str:
    """Render the canonical markdown form (deterministic, byte-stable)."""
    lines = [table.header_line()]
    lines.append("| " + " | ".join("---" for _ in table.columns) + " |")
    for row in table.rows:
        lines.append("| " + " | ".join(_escape_cell(c) for c in row) + " |")
    return "\n".join(lines)


def apply_intermediate(state: TableState, block: str) -> TableState:
    """Apply a solver-produced table block to the working state.

    The sentinel ``<NOT CHANGED>`` leaves the state untouched; anything
    else must parse as a markdown table and replaces ``current``.
    ``original`` is never modified.
    """
    if is_not_changed(block):
        return state
    return state.with_current(parse_markdown(block))
