"""Exception taxonomy shared by all modules.

Validation-type failures subclass ValueError so callers (and the CLI) can
treat them uniformly; guard overflows in the brute-force oracles are a
separate category because they signal "instance too large", not bad input.
"""


class DomainViolationError(ValueError):
    """A point or rectangle lies outside the declared domain."""


class DegenerateRegionError(ValueError):
    """An operation that divides by volume (or mass) hit a zero measure."""


class StructureError(ValueError):
    """A rectangle/grid does not have the required dyadic structure."""


class ConfigurationError(ValueError):
    """Mismatched domains/grids or an invalid run configuration."""


class UnsupportedDomainError(ValueError):
    """The operation is only defined on the discrete cube."""


class OracleGuardError(RuntimeError):
    """A brute-force enumeration would exceed its desk-scale guard."""
