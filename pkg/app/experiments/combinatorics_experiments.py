#!/usr/bin/env python3
"""
Exact combinatorial self-check
"""

import logging
from typing import Any, Dict

from app.config import ExperimentConfig
from app.core.combinatorics import selfcheck
from app.core.exceptions import IdentityCheckError
from app.experiments.base_experiment import BaseExperiment, frame
from app.services.ensembles import assert_rho_free, assert_z_cancellation

logger = logging.getLogger(__name__)


class SelfcheckCombinatoricsExperiment(BaseExperiment):
    """
    Every exact identity of the kernel combinatorics, in rational arithmetic
    """

    section = "selfcheck"

    def __init__(self):
        super().__init__(
            name="selfcheck-combinatorics",
            description="Alpha recursion, Stirling numbers, rising-factorial and series identities",
        )

    def execute(self, config: ExperimentConfig) -> Dict[str, Any]:
        m_max = config.selfcheck.m_max
        entries = selfcheck(m_max)

        # the conditional partition laws inherit the same identities
        bad = []
        for m in range(1, min(m_max, 8) + 1):
            try:
                assert_z_cancellation(m, 1)
                for k in range(1, m + 1):
                    assert_rho_free(m, k)
            except IdentityCheckError as e:
                bad.append(str(e))
        entries.append({
            "identity": "partition_laws_free_of_z_and_rho",
            "m_range": [1, min(m_max, 8)],
            "status": "fail" if bad else "pass",
            **({"detail": "; ".join(bad)} if bad else {}),
        })

        passed = all(e["status"] == "pass" for e in entries)
        return {
            "report": {"identities": entries},
            "passed": passed,
            "tables": {"identities": frame({k: v for k, v in e.items() if k != "m_range"} for e in entries)},
        }
