class SummaryError(Exception):
    """A result grid that cannot be summarized; `missing` names the absent cells."""

    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__(f"missing {len(self.missing)} result cells: {', '.join(self.missing)}")
