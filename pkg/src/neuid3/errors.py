"""Exception types. Every error carries a short machine-readable ``code``."""


class NeuID3Error(Exception):
    code = "error"

    def __init__(self, message=""):
        super().__init__(message or self.code)


class CyclicProgramError(NeuID3Error):
    code = "cyclic-program"


class UnknownAtomError(NeuID3Error, KeyError):
    code = "unknown-atom"


class WMCTooLargeError(NeuID3Error):
    code = "wmc-too-large"


class ShapeError(NeuID3Error, ValueError):
    code = "shape-error"


class MissingFeatureError(NeuID3Error, KeyError):
    code = "missing-feature"


class NotTrainableError(NeuID3Error, TypeError):
    code = "not-trainable"


class UnknownConceptError(NeuID3Error, ValueError):
    code = "unknown-concept"


class EmptyLeafError(NeuID3Error, ValueError):
    code = "empty-leaf"


class ZeroPathMassError(NeuID3Error, ZeroDivisionError):
    code = "zero-path-mass"


class ParseError(NeuID3Error, ValueError):
    code = "parse-error"


class DataError(NeuID3Error, ValueError):
    code = "data-error"
