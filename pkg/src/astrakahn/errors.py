class AkError(Exception):
    """Base class for toolkit errors."""


class ParseError(AkError):
    def __init__(self, message, line=None, col=None):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(where + message)


class GroundError(AkError):
    """An order operation received a term with variables or switches."""


class NormalizeError(AkError):
    pass


class ElaborationError(AkError):
    pass


class DepthError(AkError):
    pass


class RuntimeFault(AkError):
    pass


class ContractViolation(RuntimeFault):
    pass
