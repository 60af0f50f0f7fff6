class WorkloadFormatError(Exception):
    """A workload file row that cannot be read back into a job."""

    def __init__(self, message, line=None):
        self.message = message
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)
