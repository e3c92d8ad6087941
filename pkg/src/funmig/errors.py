"""Exception hierarchy shared by every engine module."""

from __future__ import annotations


class FunmigError(Exception):
    code = "Error"


class TypeMismatch(FunmigError):
    code = "TypeMismatch"


class UnknownEntity(FunmigError):
    code = "UnknownEntity"


class UnknownGenerator(FunmigError):
    code = "UnknownGenerator"


class UnknownAttribute(FunmigError):
    code = "UnknownAttribute"


class IllFormedMapping(FunmigError):
    code = "IllFormedMapping"


class SchemaMismatch(FunmigError):
    code = "SchemaMismatch"


class PreconditionFailed(FunmigError):
    code = "PreconditionFailed"


class Contradiction(FunmigError):
    """Two distinct literals were forced equal."""

    code = "Contradiction"


class KeyConflict(Contradiction):
    """Linked records disagree on a literal attribute."""

    code = "KeyConflict"

    def __init__(self, message: str, conflicts: list[dict] | None = None) -> None:
        super().__init__(message)
        self.conflicts = conflicts or []


class ChaseBudgetExceeded(FunmigError):
    code = "ChaseBudgetExceeded"

    def __init__(self, message: str, fresh_rows: int, rounds: int) -> None:
        super().__init__(message)
        self.fresh_rows = fresh_rows
        self.rounds = rounds


class MergeError(FunmigError):
    code = "MergeError"


class DanglingForeignKey(FunmigError):
    code = "DanglingForeignKey"


# user-defined functions

class DuplicateName(FunmigError):
    code = "DuplicateName"


class UnknownFunction(FunmigError):
    code = "UnknownFunction"


class ArityMismatch(FunmigError):
    code = "ArityMismatch"


class EvaluationError(FunmigError):
    code = "EvaluationError"


# CSV bundles

class CsvError(FunmigError):
    code = "CsvError"

    def __init__(self, message: str, file: str | None = None,
                 row: int | None = None, column: str | None = None) -> None:
        where = ":".join(str(p) for p in (file, row, column) if p is not None)
        super().__init__(f"{where}: {message}" if where else message)
        self.file = file
        self.row = row
        self.column = column


class HeaderMismatch(CsvError):
    code = "HeaderMismatch"


class UnparsableLiteral(CsvError):
    code = "UnparsableLiteral"


class DuplicateId(CsvError):
    code = "DuplicateId"


class MissingFile(CsvError):
    code = "MissingFile"


class CsvDanglingForeignKey(CsvError, DanglingForeignKey):
    code = "DanglingForeignKey"
