"""Exception hierarchy. Everything raised on bad data derives from LtrError."""


class LtrError(Exception):
    """Base class for data and validation errors."""


class CorpusValidationError(LtrError, ValueError):
    """Input corpus files violate the ingest contract."""


class EmbeddingFormatError(LtrError, ValueError):
    """Binary embedding file is malformed or disagrees with its id list."""


class UnknownEntityError(LtrError, KeyError):
    """A query references entity ids that are not nodes of the graph."""

    def __init__(self, entity_ids):
        self.entity_ids = list(entity_ids)
        super().__init__(f"unknown entities: {', '.join(self.entity_ids)}")

    def __str__(self):
        return self.args[0]


class QueryError(LtrError, ValueError):
    """A query lacks what the requested retrieval method needs."""
