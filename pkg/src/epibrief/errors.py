"""Exception hierarchy shared across the package.

Protocol clients, the model gateway, and the orchestrator all raise from
this module so callers can distinguish transport faults from contract
violations without importing each other.
"""


class EpibriefError(Exception):
    """Base class for all package errors."""


class ConfigError(EpibriefError):
    """A configuration file or value violates its schema or range."""


class ParseError(EpibriefError):
    """A config or script file could not be read as its expected format."""


class EmptyQueryError(EpibriefError):
    """The investigation query is blank after trimming."""


class UnknownScenarioError(EpibriefError):
    """No loaded scenario matches the requested id."""


class UnknownSessionError(EpibriefError):
    """No session matches the requested id."""


class NotReadyError(EpibriefError):
    """The briefing was requested before the session completed."""


class GatewayError(EpibriefError):
    """Base for model-gateway failures the orchestrator degrades on."""


class ProviderUnreachableError(GatewayError):
    """The live provider could not be reached or returned a non-2xx."""


class ScriptExhaustedError(GatewayError):
    """The scripted provider ran out of replies for a role tag."""


class SourceError(EpibriefError):
    """Base for data-source client failures (WHO, CDC, PubMed)."""


class TransportError(SourceError):
    """HTTP transport failed or the endpoint returned an error status."""


class InvalidQueryError(SourceError):
    """A source query object violates its own invariants."""


class MalformedEnvelopeError(SourceError):
    """A JSON response body lacks the expected envelope structure."""


class MalformedXmlError(SourceError):
    """An XML body is unparseable or structurally invalid."""


class ServerRejectedError(SourceError):
    """The CDC WONDER server answered with an error message body."""

    def __init__(self, message: str):
        super().__init__(message)
        self.server_message = message


class RestrictionsNotAcceptedError(SourceError):
    """A WONDER request was built without accepting data-use restrictions."""


class EmptyParameterNameError(SourceError):
    """A WONDER request contains a parameter with an empty name."""


class NotFoundError(SourceError):
    """The requested article does not exist at the endpoint."""


class SchemaViolationError(SourceError):
    """A parsed document violates a structural invariant (e.g. offsets)."""


class NotBioCError(SourceError):
    """Well-formed XML that is not a BioC collection."""
