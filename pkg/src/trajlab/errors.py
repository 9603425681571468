"""Exception types shared across the toolkit."""


class TrajlabError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(TrajlabError):
    """A config file, registry id, or wiring parameter is invalid."""


class TransportError(TrajlabError):
    """An HTTP call failed after exhausting retries, or failed non-retryably."""


class ToolError(TrajlabError):
    """A tool call failed; the episode loop converts this into a 'None' observation."""


class ScriptExhaustedError(TrajlabError):
    """A scripted client ran out of queued responses; tests should fail loudly."""


class EpisodeError(TrajlabError):
    """An episode could not complete (e.g. LM transport failure after retries)."""


class DatasetError(TrajlabError):
    """A dataset file did not match its documented schema."""


class CurationError(TrajlabError):
    """A curation plan could not be satisfied (e.g. pool shortfall)."""


class ExportError(TrajlabError):
    """Trajectories are not exportable as-is (e.g. unparsed action rounds)."""
