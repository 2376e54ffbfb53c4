class IndexFundError(Exception):
    """Base error; `module` names the pipeline stage that raised it."""

    module = "indexfund"

    def __init__(self, message, module=None):
        super().__init__(message)
        if module is not None:
            self.module = module


class ParseError(IndexFundError):
    module = "data_ingest"


class ValidationError(IndexFundError):
    module = "data_ingest"


class InsufficientDataError(IndexFundError):
    module = "data_ingest"


class DegenerateInputError(IndexFundError):
    module = "similarity"


class CapacityError(IndexFundError):
    module = "clustering"


class NoDataError(IndexFundError):
    module = "benchmarks"


class BurnInError(IndexFundError):
    module = "benchmarks"


class DimensionError(IndexFundError):
    module = "weighting_qp"


class InfeasibleError(IndexFundError):
    module = "weighting_qp"

    def __init__(self, message, min_turnover):
        super().__init__(message)
        self.min_turnover = min_turnover


class ConfigError(IndexFundError):
    module = "cli"
