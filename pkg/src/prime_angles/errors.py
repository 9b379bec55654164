"""Exception types shared across the package."""

import os


class PrimeAnglesError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PrimeAnglesError, ValueError):
    """An argument violates a documented precondition."""


class BudgetError(PrimeAnglesError):
    """A computation would exceed the configured memory or enumeration budget."""


DEFAULT_BUDGET_MB = 3072


def budget_bytes():
    """Memory budget in bytes, from ``PRIME_ANGLES_BUDGET_MB`` if set."""
    raw = os.environ.get("PRIME_ANGLES_BUDGET_MB")
    mb = float(raw) if raw else DEFAULT_BUDGET_MB
    return int(mb * 1024 * 1024)


def check_budget(nbytes, what):
    if nbytes > budget_bytes():
        raise BudgetError(
            f"{what} needs ~{nbytes / 2**20:.0f} MB, over the budget of "
            f"{budget_bytes() / 2**20:.0f} MB (set PRIME_ANGLES_BUDGET_MB to raise it)"
        )
