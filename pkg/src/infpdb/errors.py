"""Exception hierarchy.

Every error carries a short machine-readable ``reason`` slug; the CLI
reports it verbatim in its JSON output.
"""


class PdbError(Exception):
    reason = "invalid"


class InvalidPdb(PdbError):
    reason = "invalid-pdb"


class InvalidProbability(PdbError):
    reason = "invalid-probability"


class DivergentMarginals(PdbError):
    reason = "divergent-marginals"


class DivergentRates(PdbError):
    reason = "divergent-rates"


class DivergentBlocks(PdbError):
    reason = "divergent-blocks"


class DivergentComponents(PdbError):
    reason = "divergent-components"


class NonconvergentFamily(PdbError):
    reason = "nonconvergent-family"


class FactOutsideFamily(PdbError):
    reason = "fact-outside-family"


class UnsupportedSubfamilyShape(PdbError):
    reason = "unsupported-subfamily-shape"


class AlmostSureFact(PdbError):
    reason = "almost-sure-fact"


class BlockOverflow(PdbError):
    reason = "block-overflow"


class OverlappingBlocks(PdbError):
    reason = "overlapping-blocks"


class OverlappingFactSets(PdbError):
    reason = "overlapping-fact-sets"


class NotACompletion(PdbError):
    reason = "not-a-completion"


class PreconditionViolated(PdbError):
    reason = "precondition-violated"


class WorldBudgetExceeded(PdbError):
    reason = "world-budget-exceeded"


class QueryError(PdbError):
    reason = "query-error"


class QuerySyntaxError(QueryError):
    reason = "syntax-error"

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class ArityMismatch(QueryError):
    reason = "arity-mismatch"


class UnboundVariable(QueryError):
    reason = "unbound-variable"


class ModeMismatch(PdbError):
    reason = "mode-mismatch"


class SpecError(PdbError):
    """A spec file that is malformed or violates the file schema."""

    reason = "invalid-spec"


class LambdaCapExceeded(PdbError):
    reason = "lambda-cap-exceeded"
