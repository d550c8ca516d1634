"""
Exception hierarchy shared by every service.

Operations documented as "never throws" (validate, score_instance, ...) return
report objects instead; everything else raises one of these.
"""


class RpgError(Exception):
    """Base class for all domain errors."""


class ConfigError(RpgError):
    pass


class SchemaError(RpgError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class OversizeContext(RpgError):
    def __init__(self, length: int, cap: int):
        super().__init__(f"linearized context has {length} tokens, cap is {cap}")
        self.length = length
        self.cap = cap


# ---- program text / token sequences ----

class ProgramSyntaxError(RpgError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ArityError(RpgError):
    pass


class MalformedSequence(RpgError):
    pass


# ---- legality sessions ----

class ClosedSession(RpgError):
    pass


class IllegalToken(RpgError):
    def __init__(self, token, legal_count: int):
        super().__init__(f"{token} is not legal here ({legal_count} legal tokens)")
        self.token = token


# ---- execution ----

class ExecutionError(RpgError):
    pass


class DivisionByZero(ExecutionError):
    pass


class NonNumericCell(ExecutionError):
    pass


class RangeError(ExecutionError):
    pass
