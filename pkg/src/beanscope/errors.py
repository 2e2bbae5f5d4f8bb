"""Exception hierarchy shared by every beanscope module."""


class BeanscopeError(Exception):
    """Base class for user-facing pipeline errors."""


class UnsupportedFormat(BeanscopeError):
    pass


class CorruptImage(BeanscopeError):
    pass


class RegionOutOfBounds(BeanscopeError):
    pass


class EmptyRegion(BeanscopeError):
    pass


class SchemeMismatch(BeanscopeError):
    pass


class SingleClassTrainingSet(BeanscopeError):
    pass


class FewerThanTwoClasses(BeanscopeError):
    pass


class DegenerateSplit(BeanscopeError):
    pass


class EmptyTestSet(BeanscopeError):
    pass


class LayoutOverflow(BeanscopeError):
    pass


class VersionMismatch(BeanscopeError):
    pass


class MalformedFile(BeanscopeError):
    pass


class MissingColumn(MalformedFile):
    def __init__(self, column: str, path=None):
        self.column = column
        where = f" in {path}" if path else ""
        super().__init__(f"missing required column {column!r}{where}")


class MalformedRow(MalformedFile):
    def __init__(self, row: int, reason: str, path=None):
        self.row = row
        where = f"{path}: " if path else ""
        super().__init__(f"{where}row {row}: {reason}")
