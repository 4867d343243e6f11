class NocSentinelError(Exception):
    """Root of every error raised by noc_sentinel."""


class InvalidArgumentError(NocSentinelError, ValueError):
    pass


class UnsupportedMetricError(InvalidArgumentError):
    pass


class TrainingPurityError(InvalidArgumentError):
    """Raised when a training trace carries attack labels."""


class ConfigError(NocSentinelError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class TraceParseError(NocSentinelError, ValueError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")
