"""Exception types shared across the package."""


class HypotestError(Exception):
    """Base class for all package-specific errors."""


class AxisError(HypotestError):
    """Unknown, duplicated, or overlapping axis names."""


class NormalizationError(HypotestError):
    """A probability tensor fails nonnegativity or unit-sum checks."""


class AbsoluteContinuityViolated(HypotestError):
    """support(p) is not contained in support(q) for a divergence D(p||q)."""


class StructureError(HypotestError):
    """A joint law does not factorize as its declared hypothesis structure."""


class NoFeasiblePoint(HypotestError):
    """The constrained maximization found no feasible witness."""


class DegradednessUnverifiable(HypotestError):
    """A broadcast channel was not supplied in degraded factorized form."""


class AlphaOutOfRange(HypotestError):
    """The curve parameter lies outside [-R, 0]."""


class BudgetExceeded(HypotestError):
    """An enumeration would exceed the configured size budget."""


class SchemeParamError(HypotestError):
    """Simulation parameters violate a scheme's rate or size requirements."""


class CodebookBudgetError(SchemeParamError):
    """Requested codebooks exceed the configured memory budget."""


class SchemaError(HypotestError):
    """A run configuration fails schema validation; message names the path."""
