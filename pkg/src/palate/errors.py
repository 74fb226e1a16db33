"""Exception hierarchy shared across the package."""


class PalateError(Exception):
    """Base class for all package errors."""


# --- catalog / embedding loading ---

class FileUnreadable(PalateError):
    pass


class ParseError(PalateError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyAfterFilter(PalateError):
    def __init__(self, diet):
        self.diet = diet
        super().__init__(f"no items remain after filtering for diet {diet!r}")


class BadMagic(PalateError):
    pass


class DimensionMismatch(PalateError):
    pass


class MissingEmbedding(PalateError):
    def __init__(self, item_id):
        self.item_id = item_id
        super().__init__(f"no embedding row for catalog item {item_id!r}")


class TooFewItems(PalateError):
    pass


class DegenerateEmbeddings(TooFewItems):
    """All embeddings coincide; the kernel bandwidth would be zero."""


# --- elicitation ---

class CatalogTooSmall(PalateError):
    pass


class SelectionNotSubset(PalateError):
    pass


class NotEnoughItems(PalateError):
    pass


# --- recommendation / metrics ---

class EmptyPool(PalateError):
    pass


class EmptyRecommendation(PalateError):
    pass


class LengthMismatch(PalateError):
    pass


# --- service ---

class UnknownDiet(PalateError):
    pass


class UnknownSession(PalateError):
    pass


class SessionCompleted(PalateError):
    pass


class ConcurrentStep(PalateError):
    pass


class ConfigHashMismatch(PalateError):
    pass
