"""Exception hierarchy shared across the kit."""


class EllisKitError(Exception):
    pass


class MalformedPointError(EllisKitError):
    pass


class NotAFamilyError(EllisKitError):
    pass


class ParseError(EllisKitError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {message}" if line else message)


class ValidationError(EllisKitError):
    pass


class CoverageGapError(EllisKitError):
    """No rule matches a point (possible beyond the validated depth)."""

    def __init__(self, point):
        self.point = point
        super().__init__(f"no rule matches {point}")


class UndecidedOrbitError(EllisKitError):
    def __init__(self, steps: int):
        self.steps = steps
        super().__init__(f"orbit analysis undecided after {steps} steps")


class NotEventuallyPeriodicError(EllisKitError):
    pass


class DerivedNotInvariantError(EllisKitError):
    """A rule maps an internal point to an isolated one; X' is not invariant."""

    def __init__(self, rule_repr: str):
        self.rule_repr = rule_repr
        super().__init__(f"X' not invariant under rule: {rule_repr}")


class PreconditionError(EllisKitError):
    def __init__(self, which: str):
        self.which = which
        super().__init__(f"precondition failed: {which}")
