"""Exception hierarchy shared across the package.

Every error carries a stable ``kind`` string so the CLI can print a
greppable one-line prefix.
"""


class SemfError(Exception):
    kind = "error"


class ParseError(SemfError):
    kind = "parse"


class SchemaError(SemfError):
    kind = "schema"


class ImputationError(SemfError):
    kind = "imputation"


class SizingError(SemfError):
    kind = "sizing"


class SplitError(SemfError):
    kind = "split"


class ShapeError(SemfError):
    kind = "shape"


class NumericError(SemfError):
    kind = "numeric"


class ContractError(SemfError):
    kind = "contract"


class FormatError(SemfError):
    kind = "format"


class TrainingError(SemfError):
    kind = "training"


class UsageError(SemfError):
    kind = "usage"
