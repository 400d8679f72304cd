class FMPairError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FMPairError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class UntrainableDatasetError(FMPairError):
    """No user in the dataset has an unobserved item to sample as a negative."""


class NumericDivergenceError(FMPairError, FloatingPointError):
    """A utility or parameter became NaN or infinite during SGD."""

    def __init__(self, group, epoch=None, iteration=None):
        self.group = group
        self.epoch = epoch
        self.iteration = iteration
        where = []
        if epoch is not None:
            where.append(f"epoch {epoch}")
        if iteration is not None:
            where.append(f"iteration {iteration}")
        suffix = f" at {', '.join(where)}" if where else ""
        super().__init__(f"non-finite value in parameter group {group!r}{suffix}")


class SchemaError(FMPairError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class BinError(FMPairError, ValueError):
    pass


class ParseError(FMPairError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DescriptorError(FMPairError, ValueError):
    pass


class EvaluationError(FMPairError):
    pass


class ConfigError(FMPairError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
