class PolicyError(Exception):
    """Base class for usage-policy statement problems."""

    def __init__(self, message, position=None, line=None):
        self.message = message
        self.position = position
        self.line = line
        super().__init__(str(self))

    def at_line(self, line):
        """Return a copy of this error annotated with a policy-file line number."""
        return type(self)(self.message, position=self.position, line=line)

    def __str__(self):
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.position is not None:
            where.append(f"column {self.position + 1}")
        return f"{self.message} ({', '.join(where)})" if where else self.message


class PolicySyntaxError(PolicyError):
    pass


class UnknownResourceKind(PolicyError):
    pass


class UnknownDurationUnit(PolicyError):
    pass


class FractionOutOfRange(PolicyError):
    pass


class LedgerError(Exception):
    """Raised on non-monotone ticks, over-capacity samples or windows beyond retention."""
