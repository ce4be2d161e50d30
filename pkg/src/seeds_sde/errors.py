"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (solver/schedule/grid mismatch)."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class GridError(ValueError):
    """Invalid time discretization."""


class DegenerateGridError(GridError):
    """Two consecutive grid times coincide after schedule inversion."""
