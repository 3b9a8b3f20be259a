"""
Sweep over equations of state.

Each grid point is classified, approached numerically and, when
regularizable, continued through the singularity. Points run in a process
pool; rows come back in grid order.
"""

from dataclasses import dataclass
from fractions import Fraction
from multiprocessing import Pool
from typing import Any, Dict, List, Optional, Sequence, Tuple

from bigbang.bounce import approach_branch, asymptotic_form, extend_through_singularity, near_singularity_fit
from bigbang.cosmo import CosmologyParams, reduce
from bigbang.exceptions import BigBangError, RejectedInputError
from bigbang.flow import IntegratorOptions
from bigbang.ratnum import classify, format_rational, parse_rational
from config.config_manager import config_manager
from utils.logger import get_logger


logger = get_logger(__name__)

STATUS_OK = "ok"
STATUS_NO_EXTENSION = "no-extension"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class SweepReport:
    """One row per grid point, in grid order, plus the rows that did not complete."""
    grid: Tuple[Fraction, ...]
    rows: Tuple[Dict[str, Any], ...]

    @property
    def failures(self) -> List[Dict[str, Any]]:
        return [
            {"w": row["w"], "reason": row["reason"], "message": row["message"]}
            for row in self.rows
            if row["status"] != STATUS_OK
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "grid": [format_rational(w) for w in self.grid],
            "rows": list(self.rows),
            "failures": self.failures,
        }


def parse_w_list(text: str) -> List[Fraction]:
    """Comma-separated exact rationals, e.g. "1/2,1,2,5/3"."""
    items = [item.strip() for item in text.split(",")]
    if not text.strip() or any(not item for item in items):
        raise RejectedInputError(f"Malformed w list '{text}'", reason="malformed-w-list")
    return [parse_rational(item) for item in items]


def sweep_point(job: Tuple[CosmologyParams, Fraction, Optional[IntegratorOptions], bool]) -> Dict[str, Any]:
    """Classify, approach, fit and (optionally) continue one equation of state."""
    params, w, opts, with_bounce = job
    cls = classify(w)
    form = asymptotic_form(w)
    row: Dict[str, Any] = {
        "w": format_rational(w),
        "regularizable": cls.regularizable,
        "kind": cls.kind.value,
        "gamma": format_rational(cls.gamma),
        "parity": cls.p_parity.value if cls.p_parity else None,
        "psi0": form.psi0,
        "gamma_hat": None,
        "prefactor_hat": None,
        "continuity_gap": None,
        "gamma_hat_post": None,
        "status": STATUS_OK,
        "reason": None,
        "message": None,
    }
    try:
        model = reduce(params.with_overrides(w=w))
        pre = approach_branch(model, params.with_overrides(w=w), opts=opts)
        fit = near_singularity_fit(model, pre, opts)
        row["gamma_hat"] = fit.gamma_hat
        row["prefactor_hat"] = fit.prefactor_hat
        if not cls.regularizable:
            row["status"] = STATUS_NO_EXTENSION
            row["reason"] = cls.reason
            row["message"] = f"gamma = {format_rational(cls.gamma)} has no real branch through the singularity"
        elif with_bounce:
            result = extend_through_singularity(model, cls, pre, opts=opts)
            row["continuity_gap"] = result.continuity_gap
            row["gamma_hat_post"] = result.gamma_hat_post
    except BigBangError as e:
        logger.warning(f"Sweep point w={format_rational(w)} failed: {e.reason}: {e}")
        row["status"] = STATUS_FAILED
        row["reason"] = e.reason
        row["message"] = str(e)
    return row


def run_sweep(params: CosmologyParams, grid: Sequence[Fraction], jobs: Optional[int] = None,
              opts: Optional[IntegratorOptions] = None, with_bounce: bool = True) -> SweepReport:
    """
    Evaluate every grid point, in parallel when more than one worker is available.

    Args:
        params: Shared parameters; w is overridden per grid point
        grid: Exact equations of state
        jobs: Worker count; [SWEEP] max_workers when omitted
        opts: Integrator options for every run
        with_bounce: Continue regularizable points through the singularity

    Returns:
        SweepReport with rows in grid order
    """
    grid = tuple(grid)
    if not grid:
        raise RejectedInputError("Sweep grid is empty", reason="empty-grid")
    if opts is None:
        opts = IntegratorOptions.from_config()
    workers = jobs if jobs is not None else config_manager.get_sweep_config()['max_workers']
    if workers < 1:
        raise RejectedInputError(f"Worker count must be positive, got {workers}", reason="bad-jobs")
    workers = min(workers, len(grid))
    job_list = [(params, w, opts, with_bounce) for w in grid]

    logger.info(f"Sweeping {len(grid)} equations of state on {workers} worker(s)")
    if workers == 1:
        rows = [sweep_point(job) for job in job_list]
    else:
        with Pool(workers) as pool:
            rows = pool.map(sweep_point, job_list)
    return SweepReport(grid=grid, rows=tuple(rows))
