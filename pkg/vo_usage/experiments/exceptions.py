class CellError(RuntimeError):
    """A sweep cell that failed; the sweep stops and names the cell."""

    def __init__(self, cell, cause):
        self.cell = cell
        self.cause = cause
        super().__init__(f"cell {cell.label} failed: {cause}")
