"""Exception hierarchy shared across the package.

Every exception carries a machine-readable ``code`` that the CLI turns into
an exit status.
"""


class TSCEError(Exception):
    code = "ERROR"


class GraphError(TSCEError, ValueError):
    code = "INVALID_GRAPH"


class VariableNotFoundError(GraphError, KeyError):
    code = "VARIABLE_NOT_FOUND"

    def __str__(self):
        return Exception.__str__(self)


class PredicateError(TSCEError, ValueError):
    code = "INVALID_PREDICATE"


class NoContextError(TSCEError, LookupError):
    code = "NO_CONTEXT"


class DataError(TSCEError, ValueError):
    code = "INVALID_DATA"


class InvalidQuestionError(TSCEError, ValueError):
    """Raised when a why-question does not hold on the data.

    ``reason`` names the failed condition: ``relation``, ``no_context``,
    ``not_binary``, ``not_active``, ``unknown_variable``, ``out_of_range``
    or ``syntax``.
    """

    code = "INVALID_QUESTION"

    def __init__(self, message, reason="relation"):
        super().__init__(message)
        self.reason = reason


class RuleError(TSCEError, ValueError):
    code = "INVALID_SCENARIO"


class TreeError(TSCEError, ValueError):
    code = "INVALID_TREE"


class DiscoveryError(TSCEError, ValueError):
    code = "DISCOVERY_FAILED"


class RankDeficientError(DiscoveryError):
    code = "RANK_DEFICIENT"

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class GameError(TSCEError, RuntimeError):
    code = "GAME_ERROR"


class LexiconError(TSCEError, ValueError):
    code = "INVALID_LEXICON"


EXIT_CODES = {
    "ERROR": 1,
    "INVALID_INPUT": 3,
    "INVALID_DATA": 3,
    "INVALID_GRAPH": 3,
    "VARIABLE_NOT_FOUND": 3,
    "INVALID_PREDICATE": 3,
    "INVALID_LEXICON": 3,
    "INVALID_TREE": 3,
    "INVALID_QUESTION": 4,
    "NO_CONTEXT": 5,
    "INVALID_SCENARIO": 6,
    "DISCOVERY_FAILED": 7,
    "RANK_DEFICIENT": 7,
    "GAME_ERROR": 8,
}
