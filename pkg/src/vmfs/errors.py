"""Exception hierarchy. Everything raised on bad data derives from VmfsError."""


class VmfsError(Exception):
    pass


class ParseError(VmfsError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class EmptyDatasetError(VmfsError, ValueError):
    pass


class DimensionError(VmfsError, ValueError):
    pass


class DomainError(VmfsError, ValueError):
    pass


class LabelsRequiredError(VmfsError, ValueError):
    pass


class InsufficientClassError(VmfsError, ValueError):
    pass


class ModeError(VmfsError, ValueError):
    pass


class UnknownAttributeError(VmfsError, AttributeError):
    pass


class TooFewPointsError(VmfsError, ValueError):
    pass


class DegenerateClusteringError(VmfsError, ValueError):
    pass


class PipelineError(VmfsError, RuntimeError):
    pass
