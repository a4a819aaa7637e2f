"""Exception hierarchy shared by all modules."""


class GreenwalkError(Exception):
    """Base class; ``module`` names the subsystem that raised."""

    module = "greenwalk"

    def __str__(self):
        return f"[{self.module}] {super().__str__()}"


class InputError(GreenwalkError, ValueError):
    module = "input"


class ResourceError(GreenwalkError, RuntimeError):
    module = "resource"


class DivergenceError(GreenwalkError, ArithmeticError):
    module = "divergence"


class InstabilityError(GreenwalkError, ArithmeticError):
    module = "instability"


class AdmissibilityError(GreenwalkError, ValueError):
    module = "admissibility"


class ParameterError(GreenwalkError, ValueError):
    module = "parameters"


class InvariantError(GreenwalkError, ValueError):
    module = "invariant"


class SchemaError(GreenwalkError, ValueError):
    module = "config"
