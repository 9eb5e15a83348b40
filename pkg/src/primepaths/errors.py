"""Exception hierarchy shared by every module."""


class PamError(Exception):
    """Base class for all library errors."""


class ContractError(PamError, ValueError):
    """A precondition of an operation was violated by the caller."""


class PrimeCapacityError(PamError):
    """The next prime does not fit the configured integer width."""


class DecodeError(PamError):
    """A value has a prime factor unknown to the path dictionary."""

    def __init__(self, value, factor):
        self.value = value
        self.factor = factor
        super().__init__(f"cannot decode {value}: factor {factor} is not mapped")


class CellOverflowError(PamError, OverflowError):
    """A fixed-width matrix cell exceeded 64 bits."""

    def __init__(self, row, col, k=None, value=None):
        self.row, self.col, self.k, self.value = row, col, k, value
        where = f"cell ({row}, {col})" if k is None else f"k={k} cell ({row}, {col})"
        super().__init__(f"uint64 overflow at {where}; rerun with arbitrary precision cells")


class ResourceError(PamError, MemoryError):
    """The lossless path space outgrew the configured cap."""

    def __init__(self, k_reached, factors, cap):
        self.k_reached, self.factors, self.cap = k_reached, factors, cap
        super().__init__(
            f"lossless expansion stopped at k={k_reached}: {factors} stored factors exceed cap {cap}"
        )


class ParseError(PamError, ValueError):
    def __init__(self, path, lineno, line, reason="expected subject<TAB>relation<TAB>object"):
        self.path, self.lineno = path, lineno
        super().__init__(f"{path}:{lineno}: {reason}: {line!r}")


class EmptyGraphError(PamError, ValueError):
    pass


class EmptyVocabularyError(PamError, ValueError):
    pass
