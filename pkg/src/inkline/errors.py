"""Exception taxonomy. UserError subclasses map to CLI exit code 1."""


class UserError(Exception):
    """Bad input, bad config, bad file: the caller can fix it."""


class ImageReadError(UserError):
    pass


class ConfigError(UserError):
    pass


class IngestError(UserError):
    pass


class ManifestError(UserError):
    pass


class ManifestFormatError(ManifestError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DuplicateSampleIdError(ManifestError):
    def __init__(self, sample_id: str, line_no: int | None = None):
        where = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"duplicate sample_id {sample_id!r}{where}")
        self.sample_id = sample_id


class SplitViolationError(ManifestError):
    pass


class EvalError(UserError):
    pass


class MetricsError(UserError):
    pass
