"""Exception hierarchy shared by every module.

Each family carries the CLI exit code it maps to.
"""


class DgaError(Exception):
    exit_code = 1


class DataError(DgaError, ValueError):
    """Bad input data: parse, ingest, or argument-domain failures."""

    exit_code = 3


class EmptyInput(DataError):
    pass


class InvalidCharacter(DataError):
    pass


class MalformedRule(DataError):
    pass


class NoKnownSuffix(DataError):
    pass


class SingleLabel(DataError):
    pass


class MalformedCsvLine(DataError):
    pass


class BadLengthRange(DataError):
    pass


class InvalidDate(DataError):
    pass


class WordlistTooSmall(DataError):
    pass


class BadWord(DataError):
    pass


class SingleClassInput(DataError):
    pass


class BadRatios(DataError):
    pass


class NonPositiveBinWidth(DataError):
    pass


class EmptyMatrix(DataError):
    pass


class IoFailure(DgaError, OSError):
    exit_code = 3


class ModelFormatError(DgaError):
    exit_code = 4


class BadMagic(ModelFormatError):
    pass


class UnsupportedVersion(ModelFormatError):
    pass


class CorruptPayload(ModelFormatError):
    pass


class NetworkError(DgaError):
    exit_code = 5
