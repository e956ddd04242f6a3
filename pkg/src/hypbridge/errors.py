class NumericalFailure(ArithmeticError):
    """A series, quadrature or table lookup could not reach its accuracy target."""
