class SpecViolation(Exception):
    """A height set or spec breaks a structural invariant (gap, ambiguity, ...)."""


class NotADescendant(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    """Exhaustive census would exceed the configured pair/tuple budget."""

    def __init__(self, needed: int, budget: int, what: str = "pairs"):
        self.needed = needed
        self.budget = budget
        super().__init__(f"census needs {needed} {what}, budget is {budget}")


class StagesExhausted(RuntimeError):
    pass
