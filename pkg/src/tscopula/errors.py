"""Exception hierarchy.

Every error carries a short machine-readable ``category`` so the command
line front end can report failures without parsing messages.
"""


class TSCopulaError(Exception):
    category = "error"


class SingularDesign(TSCopulaError, ArithmeticError):
    """Local weighted design matrix is (numerically) singular at ``point``."""

    category = "singular_design"

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class NoValidBandwidth(TSCopulaError):
    category = "no_valid_bandwidth"


class DegenerateSample(TSCopulaError, ValueError):
    category = "degenerate_sample"


class EmptyRegion(TSCopulaError):
    category = "empty_region"


class DomainError(TSCopulaError, ValueError):
    category = "domain"


class OutOfRange(TSCopulaError, ValueError):
    category = "out_of_range"


class NonConvergence(TSCopulaError):
    category = "non_convergence"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SingularGamma(TSCopulaError, ArithmeticError):
    category = "singular_gamma"


class ParseError(TSCopulaError, ValueError):
    category = "parse"

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class SchemaError(TSCopulaError, ValueError):
    category = "schema"


class NetworkError(TSCopulaError, OSError):
    category = "network"


class FormatError(TSCopulaError, ValueError):
    category = "format"


class ConfigError(TSCopulaError, ValueError):
    """Invalid configuration; ``problems`` lists every violated constraint."""

    category = "config"

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
