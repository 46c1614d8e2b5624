"""Exception types shared across the package."""


class IfcspError(Exception):
    """Base class for library errors."""


class ContractViolation(IfcspError):
    """An operation was called outside its stated preconditions."""


class InconsistentStrategy(IfcspError):
    """The (who, what, when) triple is not one of the 16 valid instances."""


class SizeGuardExceeded(IfcspError):
    """Exhaustive verification refused because m**n exceeds the guard."""


class OracleProtocolError(IfcspError):
    """An oracle received a query it cannot answer, or a malformed answer."""


class OracleTimeout(OracleProtocolError):
    """No answer arrived before the session deadline."""
