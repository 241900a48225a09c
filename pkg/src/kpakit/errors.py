"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: input problems (corpus, embeddings,
malformed artifact files) exit 2, stage failures exit 3, backend or
bridge failures exit 4.
"""


class KpaError(Exception):
    """Base class for all pipeline errors."""


class InputError(KpaError):
    """Invalid or unreadable input data (corpus, embeddings, artifacts)."""


class CorpusError(InputError):
    """Malformed corpus file or broken cross-references."""


class EmbeddingError(InputError):
    """Missing ids, dimension mismatch, or non-finite vectors."""


class StageError(KpaError):
    """A pipeline stage failed on valid inputs."""


class BackendError(KpaError):
    """Generation backend or model bridge unreachable or misbehaving."""
