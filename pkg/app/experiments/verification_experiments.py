#!/usr/bin/env python3
"""
Identity verification experiment
"""

import logging
from typing import Any, Dict

from app.config import ExperimentConfig
from app.experiments.base_experiment import BaseExperiment
from app.services.diagnostics import DEFAULT_GRID, verify_grid
from app.status import build_conformance_report, checks_frame

logger = logging.getLogger(__name__)


class VerifyExperiment(BaseExperiment):
    """
    Integral equation, Palm and Laplace identities over a (z, rho(B)) grid,
    plus the Poisson negative control
    """

    section = "verify"

    def __init__(self):
        super().__init__(
            name="verify",
            description="Monte Carlo conformance checks of the defining identities",
        )

    def execute(self, config: ExperimentConfig) -> Dict[str, Any]:
        options = config.verify
        grid = DEFAULT_GRID if options.grid == "default" else tuple(tuple(p) for p in options.grid)
        result = verify_grid(grid, options.size, self.random_source(config))
        report = build_conformance_report(result)
        logger.info(f"📊 conformance: {report['overall_status']}")
        return {
            "report": report,
            "passed": result["passed"],
            "tables": {"checks": checks_frame(result["checks"] + [result["negative_control"]])},
        }
