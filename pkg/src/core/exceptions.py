"""
Exception hierarchy shared by every package of the toolkit
"""


class PolypSegError(Exception):
    """Base class for all toolkit errors"""


class ContractError(PolypSegError, ValueError):
    """A precondition of an operation was violated"""


class DimensionMismatchError(ContractError):
    """Two rasters that must share dimensions do not"""


class DegenerateBoxError(ContractError):
    """A box has no area, or lost all of it after clipping"""


class BackendError(PolypSegError, RuntimeError):
    """A detector or segmenter backend failed or broke the adapter protocol"""


class DatasetError(PolypSegError):
    """A dataset could not be scanned or has nothing to evaluate"""


class ConfigError(PolypSegError):
    """A run configuration is invalid"""


class ReportError(PolypSegError):
    """Result tables cannot be assembled consistently"""
