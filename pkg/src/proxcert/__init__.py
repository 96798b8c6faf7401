"""Numerical certification of partial submonotonicity and subregularity, with tested solvers."""

from proxcert.problems import FIXTURE_IDS, make_fixture, make_lasso_instance, make_tv_instance
from proxcert.regularity import (
    CertificateReport,
    NeighborhoodSpec,
    RegularityQuery,
    check_psm,
    check_psr,
    conversion_cross_check,
    run_query,
)
from proxcert.solvers import (
    PDHGMMethod,
    ProxPointMethod,
    StepSchedule,
    default_pdhgm_schedule,
    fit_rate,
    run_with_monitor,
)

__version__ = "0.1.0"

__all__ = [
    "FIXTURE_IDS", "make_fixture", "make_lasso_instance", "make_tv_instance",
    "CertificateReport", "NeighborhoodSpec", "RegularityQuery", "check_psm", "check_psr",
    "conversion_cross_check", "run_query",
    "PDHGMMethod", "ProxPointMethod", "StepSchedule", "default_pdhgm_schedule", "fit_rate",
    "run_with_monitor",
]
