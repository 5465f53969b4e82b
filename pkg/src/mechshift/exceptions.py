"""Exception types shared across the package."""


class MechshiftError(Exception):
    """Base class for all package-specific errors."""


class CycleError(MechshiftError):
    """Raised when an edge set that must be acyclic contains a directed cycle."""


class GraphFormatError(MechshiftError):
    """Raised when a serialized graph document cannot be parsed."""


class MecSizeError(MechshiftError):
    """Equivalence-class enumeration exceeded the configured size limit.

    Attributes
    ----------
    partial_count : int
        Number of members found before the limit was hit. The true class is
        strictly larger.
    limit : int
        The limit that was exceeded.
    """

    def __init__(self, partial_count: int, limit: int):
        self.partial_count = partial_count
        self.limit = limit
        super().__init__(
            f"equivalence class has more than {limit} members "
            f"({partial_count} enumerated before stopping)"
        )


class NoConsistentExtensionError(MechshiftError):
    """The partially directed graph admits no acyclic extension without new colliders."""


class DegenerateDataError(MechshiftError):
    """Raised when data is numerically unusable for a test (singular covariance,
    constant columns, rank-deficient designs). Never silently mapped to p = 1."""


class CiTestError(MechshiftError):
    """A conditional-independence test failed during constraint-based search.

    Carries the offending query as ``query`` = (x, y, z).
    """

    def __init__(self, query, cause: Exception):
        self.query = query
        self.cause = cause
        super().__init__(f"CI test failed on query {query}: {cause}")


class ScoreTestError(MechshiftError):
    """An invariance test failed while scoring a DAG set.

    Carries the mechanism cell as ``key`` = (variable, parents, env_a, env_b).
    """

    def __init__(self, key, cause: Exception):
        self.key = key
        self.cause = cause
        super().__init__(
            f"invariance test failed for variable {key[0]} given parents "
            f"{sorted(key[1])} on environment pair ({key[2]}, {key[3]}): {cause}"
        )


class SkeletonMismatchError(MechshiftError):
    """Estimate and reference graph do not share a skeleton."""


class DatasetFormatError(MechshiftError):
    """A dataset file violates the expected CSV layout."""


class ConfigError(MechshiftError):
    """A run configuration is invalid. Messages name the offending dotted key."""
