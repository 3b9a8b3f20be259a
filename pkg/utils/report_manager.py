"""
Report Manager for the verify suite
Collects named check results, summarizes them and renders a pass/fail table.
"""

import time
from typing import Any, Dict, List, Optional

from rich.console import Console
from rich.table import Table


class ReportManager:
    """Collects check results for one verify session."""

    def __init__(self):
        self.check_results: List[Dict[str, Any]] = []
        self.start_time = None
        self.end_time = None
        self.environment_info: Dict[str, Any] = {}

    def set_environment_info(self, info: Dict[str, Any]):
        """Set run information (parameters, tolerances) for the report."""
        self.environment_info = info

    def add_check_result(self, name: str, suite: str, status: str, duration: float,
                         detail: Optional[str] = None, failures: Optional[List[str]] = None):
        """Add one named check to the report data."""
        self.check_results.append({
            'name': name,
            'suite': suite,
            'status': status,
            'duration': duration,
            'detail': detail,
            'failures': failures or []
        })

    def start_session(self):
        """Mark the start of the verify session."""
        self.start_time = time.perf_counter()

    def end_session(self):
        """Mark the end of the verify session."""
        self.end_time = time.perf_counter()

    def get_session_duration(self) -> float:
        """Get total session duration in seconds."""
        if self.start_time is not None and self.end_time is not None:
            return self.end_time - self.start_time
        return 0.0

    def get_summary(self) -> Dict[str, int]:
        """Count checks per status."""
        summary = {'passed': 0, 'failed': 0, 'error': 0}
        for result in self.check_results:
            status = result['status'].lower()
            if status in summary:
                summary[status] += 1
        return summary

    def all_passed(self) -> bool:
        summary = self.get_summary()
        return summary['failed'] == 0 and summary['error'] == 0 and bool(self.check_results)

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        """Report data; timings are left out unless asked for so that repeated runs compare equal."""
        checks = []
        for result in self.check_results:
            entry = {key: value for key, value in result.items() if key != 'duration' or include_timing}
            checks.append(entry)
        data = {
            'environment': self.environment_info,
            'summary': self.get_summary(),
            'checks': checks,
            'passed': self.all_passed()
        }
        if include_timing:
            data['session_duration'] = self.get_session_duration()
        return data

    def render_table(self, console: Optional[Console] = None) -> None:
        """Print the pass/fail table."""
        console = console or Console(stderr=True)
        table = Table(title="bigbang verify")
        table.add_column("Suite")
        table.add_column("Check")
        table.add_column("Status")
        table.add_column("Time [s]", justify="right")
        table.add_column("Detail")
        styles = {'passed': 'green', 'failed': 'red', 'error': 'magenta'}
        for result in self.check_results:
            status = result['status']
            detail = result['detail'] or ''
            if result['failures']:
                detail = '; '.join(result['failures'][:3])
            table.add_row(result['suite'], result['name'], f"[{styles.get(status, 'white')}]{status.upper()}[/]",
                          f"{result['duration']:.2f}", detail)
        console.print(table)
        summary = self.get_summary()
        console.print(f"{summary['passed']} passed, {summary['failed']} failed, {summary['error']} errors "
                      f"in {self.get_session_duration():.1f} s")
