class ConfigError(Exception):
    """An experiment configuration that failed validation; `errors` lists every problem found."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class SimulationInvariantError(RuntimeError):
    pass
