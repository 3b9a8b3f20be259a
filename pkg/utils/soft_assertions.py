"""
Soft Assertions for numerical checks
Collects failures of a whole check suite instead of stopping at the first one.
"""

import math
import traceback
from typing import Any, Dict, List, Optional

from utils.logger import get_logger


class SoftAssertionError(AssertionError):
    """Raised by assert_all when collected checks failed."""
    pass


class SoftAssertions:
    """Soft assertions collector used by the verify suite and the tests."""

    def __init__(self, test_name: str = ""):
        """Initialize soft assertions collector."""
        self.test_name = test_name
        self.logger = get_logger(f"SoftAssert.{test_name}" if test_name else "SoftAssert")
        self.failures: List[Dict[str, Any]] = []
        self.passed_assertions = 0
        self.failed_assertions = 0

    def assert_true(self, condition: bool, message: str = "") -> bool:
        """Assert that condition is True."""
        return self._assert(bool(condition), message, f"Expected True, but got {condition}")

    def assert_equal(self, actual: Any, expected: Any, message: str = "") -> bool:
        """Assert that actual equals expected."""
        return self._assert(actual == expected, message, f"Expected '{expected}', but got '{actual}'")

    def assert_less(self, actual: float, bound: float, message: str = "") -> bool:
        """Assert that actual is strictly below bound."""
        return self._assert(actual < bound, message, f"Expected {actual!r} < {bound!r}")

    def assert_greater(self, actual: float, bound: float, message: str = "") -> bool:
        return self._assert(actual > bound, message, f"Expected {actual!r} > {bound!r}")

    def assert_close(self, actual: float, expected: float, rel_tol: float = 1e-9, abs_tol: float = 0.0,
                     message: str = "") -> bool:
        """Assert |actual - expected| <= max(rel_tol * max(|actual|, |expected|), abs_tol)."""
        condition = math.isclose(actual, expected, rel_tol=rel_tol, abs_tol=abs_tol)
        deviation = abs(actual - expected)
        default_message = (f"Expected {expected!r}, got {actual!r} "
                           f"(deviation {deviation:.3g}, rel_tol {rel_tol:.1g}, abs_tol {abs_tol:.1g})")
        return self._assert(condition, message, default_message)

    def assert_raises(self, exception_type: type, func, *args, reason: Optional[str] = None,
                      message: str = "", **kwargs) -> bool:
        """Assert that func raises exception_type, optionally with a given reason code."""
        try:
            func(*args, **kwargs)
        except exception_type as e:
            if reason is not None and getattr(e, "reason", None) != reason:
                return self._assert(False, message,
                                    f"Expected reason '{reason}', got '{getattr(e, 'reason', None)}'")
            return self._assert(True, message, f"Raised {exception_type.__name__}")
        return self._assert(False, message, f"Expected {exception_type.__name__} to be raised")

    def _assert(self, condition: bool, user_message: str, default_message: str) -> bool:
        """Internal assertion method."""
        assertion_message = user_message if user_message else default_message

        if condition:
            self.passed_assertions += 1
            self.logger.debug(f"PASS: {assertion_message}")
            return True

        self.failed_assertions += 1
        stack_trace = traceback.format_stack()
        self.failures.append({
            'message': assertion_message,
            'detail': default_message,
            'stack_trace': ''.join(stack_trace[:-2]),
            'test_name': self.test_name
        })
        self.logger.error(f"FAIL: {assertion_message}")
        return False

    def has_failures(self) -> bool:
        """Check if there are any assertion failures."""
        return len(self.failures) > 0

    def get_failures(self) -> List[Dict[str, Any]]:
        """Get list of all assertion failures."""
        return self.failures.copy()

    def get_total_count(self) -> int:
        """Get total number of assertions."""
        return self.passed_assertions + self.failed_assertions

    def get_summary(self) -> Dict[str, Any]:
        """Get summary of all assertions."""
        return {
            'total_assertions': self.get_total_count(),
            'passed_assertions': self.passed_assertions,
            'failed_assertions': self.failed_assertions,
            'has_failures': self.has_failures(),
            'failures': [failure['message'] for failure in self.failures]
        }

    def assert_all(self, raise_exception: bool = True) -> bool:
        """
        Verify all soft assertions and optionally raise if there are failures.

        Args:
            raise_exception: Whether to raise SoftAssertionError on failures

        Returns:
            bool: True if all assertions passed, False otherwise
        """
        if self.has_failures():
            failure_messages = [f"- {failure['message']}" for failure in self.failures]
            summary_message = (
                f"Soft assertion failures in {self.test_name}:\n"
                f"Total assertions: {self.get_total_count()}\n"
                f"Passed: {self.passed_assertions}\n"
                f"Failed: {self.failed_assertions}\n"
                f"Failures:\n" + "\n".join(failure_messages)
            )
            self.logger.error(summary_message)
            if raise_exception:
                raise SoftAssertionError(summary_message)
            return False

        self.logger.debug(f"All {self.passed_assertions} soft assertions passed in {self.test_name}")
        return True

    def reset(self) -> None:
        """Reset all assertion counters and failures."""
        self.failures.clear()
        self.passed_assertions = 0
        self.failed_assertions = 0

    def log_summary(self) -> None:
        """Log summary of all assertions."""
        summary = self.get_summary()
        self.logger.info(f"{self.test_name}: {summary['passed_assertions']}/{summary['total_assertions']} "
                         f"checks passed")
        for i, message in enumerate(summary['failures'], 1):
            self.logger.info(f"{i}. {message}")


def create_soft_assertions(test_name: str = "") -> SoftAssertions:
    """Create a new soft assertions instance."""
    return SoftAssertions(test_name)
