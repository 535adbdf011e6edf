"""Exception hierarchy shared by all modules."""


class AssemblyLabError(Exception):
    """Base class for every error raised by assembly_lab."""


class ConfigurationError(AssemblyLabError):
    """An assembly specification or rule is malformed or unknown."""


class InvalidInputError(AssemblyLabError, ValueError):
    """Arguments violate a documented precondition."""


class InconsistentInputError(InvalidInputError):
    """Input data cannot come from any assembly (e.g. non-integer m_i)."""


class DivergenceError(AssemblyLabError, ArithmeticError):
    """A generating function is evaluated outside its disc of convergence."""


class UnsupportedError(AssemblyLabError):
    """The operation needs analytic hypotheses the assembly does not satisfy."""


class EmptySupportError(AssemblyLabError):
    """A conditional law was requested on an event of probability zero."""


class NoSolutionError(AssemblyLabError):
    """A saddle-point equation has no root in the admissible range."""


class RangeError(InvalidInputError):
    """A parameter lands outside the range where a formula is meaningful."""


class BudgetExceededError(AssemblyLabError):
    """The requested computation exceeds the configured cost budget."""
