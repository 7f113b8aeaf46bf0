"""Exception hierarchy shared by every qid module.

Each class maps to one named failure mode so callers (and the CLI) can
dispatch on type rather than parsing messages.
"""


class QidError(Exception):
    """Base class for all library errors."""

    code = "qid_error"


class InvalidState(QidError, ValueError):
    code = "invalid_state"


class NotHermitian(InvalidState):
    code = "not_hermitian"


class NotPSD(InvalidState):
    code = "not_psd"


class TraceNotOne(InvalidState):
    code = "trace_not_one"


class DimensionMismatch(QidError, ValueError):
    code = "dimension_mismatch"


class DimensionOverflow(QidError, ValueError):
    code = "dimension_overflow"


class EffectOutOfRange(QidError, ValueError):
    code = "effect_out_of_range"


class ParamOutOfRange(QidError, ValueError):
    code = "param_out_of_range"


class NotStochastic(QidError, ValueError):
    code = "not_stochastic"


class SizeMismatch(QidError, ValueError):
    code = "size_mismatch"


class NegativeInput(ParamOutOfRange):
    code = "negative_input"


class AlphabetTooLarge(QidError, ValueError):
    code = "alphabet_too_large"


class DegenerateChannel(QidError, ValueError):
    code = "degenerate_channel"


class SymbolOutOfRange(QidError, ValueError):
    code = "symbol_out_of_range"


class EnumerationTooLarge(QidError, ValueError):
    code = "enumeration_too_large"


class TypicalSetEmpty(QidError, ValueError):
    code = "typical_set_empty"


class InfeasibleParams(QidError, ValueError):
    code = "infeasible_params"


class InfeasibleRates(InfeasibleParams):
    code = "infeasible_rates"


class MessageOutOfRange(QidError, IndexError):
    code = "message_out_of_range"


class SameMessage(QidError, ValueError):
    code = "same_message"


class BudgetExceeded(QidError, RuntimeError):
    code = "budget_exceeded"


class TooFine(QidError, ValueError):
    code = "too_fine"


class EmptyComponent(QidError, ValueError):
    code = "empty_component"


class NoCoveringFound(QidError, RuntimeError):
    """Raised when every covering trial fails; ``best`` holds the closest attempt."""

    code = "no_covering_found"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SpecInvalid(QidError, ValueError):
    code = "spec_invalid"

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
