"""Exception hierarchy shared by every layer of the checker."""


class ChansmcError(Exception):
    """Base class for all errors raised by this package."""


class ModelError(ChansmcError):
    """A model is ill-formed, or its execution left the declared semantics."""


class ArgumentError(ChansmcError, ValueError):
    """An operation was called with arguments outside its contract."""


class ContractError(ChansmcError):
    """An internal precondition was violated by the caller."""


class CatalogError(ModelError):
    """Events are used inconsistently across automata."""


class PropertyError(ChansmcError):
    """A temporal property is malformed or references unknown symbols."""


class TraceError(ChansmcError):
    """Observations were delivered out of timestamp order."""


class ScxmlError(ModelError):
    """An SCXML document violates the supported subset.

    ``element`` names the offending tag and ``restriction`` the rule broken,
    so diagnostics can be reported in machine-readable form.
    """

    def __init__(self, message, *, element=None, restriction=None, source=None):
        super().__init__(message)
        self.element = element
        self.restriction = restriction
        self.source = source

    def to_dict(self):
        return {
            "message": str(self),
            "element": self.element,
            "restriction": self.restriction,
            "source": self.source,
        }
