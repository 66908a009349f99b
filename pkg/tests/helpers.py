import mpmath


def refined_integral(g, breaks, dps=30):
    """High-precision reference integral of a float callable over consecutive breakpoints."""
    with mpmath.workdps(dps):
        return float(mpmath.quad(lambda s: float(g(float(s))), list(breaks)))
