#!/usr/bin/env python3
"""
Base Experiment Class
Common run/validation/reporting plumbing shared by every CLI subcommand
"""

import logging
import time
from abc import ABC, abstractmethod
from typing import Any, Dict, Optional

import pandas as pd

from app.config import ExperimentConfig
from app.core.exceptions import ConfigError, PolyaError
from app.models import RandomSource

logger = logging.getLogger(__name__)


class BaseExperiment(ABC):
    """
    Abstract base class for all experiments.

    execute() returns {"report": dict, "passed": bool, "tables": {name: DataFrame}};
    run() wraps it into the standardized result the CLI consumes.
    """

    # name of the ExperimentConfig section holding this experiment's options
    section: Optional[str] = None

    def __init__(self, name: str, description: str):
        self.name = name
        self.description = description

    @abstractmethod
    def execute(self, config: ExperimentConfig) -> Dict[str, Any]:
        """
        Execute the experiment

        Returns:
            Dictionary with report, passed flag and optional CSV tables
        """
        pass

    def get_options_schema(self) -> Dict[str, Any]:
        """JSON schema of the options section, for docs and --help"""
        if self.section is None:
            return {}
        field = ExperimentConfig.model_fields[self.section]
        return field.annotation.model_json_schema()

    def random_source(self, config: ExperimentConfig) -> RandomSource:
        """Root stream of this experiment: one stream id per subcommand name"""
        stream = sum(ord(c) * 31 ** i for i, c in enumerate(self.name)) % (2 ** 32)
        return RandomSource(config.seed, stream)

    def run(self, config: ExperimentConfig) -> Dict[str, Any]:
        """
        Run the experiment with error handling and logging

        Returns:
            Standardized experiment result
        """
        start = time.perf_counter()
        logger.info(f"🚀 Running {self.name} (seed={config.seed})")
        try:
            outcome = self.execute(config)
        except ConfigError as e:
            logger.error(f"❌ Experiment {self.name} rejected its configuration: {e}")
            return {"success": False, "experiment": self.name, "error": str(e), "error_type": "config"}
        except PolyaError as e:
            logger.error(f"❌ Experiment {self.name} failed: {e}")
            return {"success": False, "experiment": self.name, "error": str(e), "error_type": type(e).__name__}
        except Exception as e:
            logger.exception(f"❌ Unexpected error in {self.name}: {e}")
            return {"success": False, "experiment": self.name, "error": str(e), "error_type": "unexpected"}

        elapsed = time.perf_counter() - start
        passed = bool(outcome.get("passed", True))
        logger.info(f"{'✅' if passed else '❌'} {self.name} finished in {elapsed:.2f}s")

        report = {
            "experiment": self.name,
            "seed": config.seed,
            "config": config.resolved(),
            "passed": passed,
            **outcome.get("report", {}),
        }
        return {
            "success": True,
            "experiment": self.name,
            "passed": passed,
            "data": report,
            "tables": outcome.get("tables", {}),
            "records": outcome.get("records"),
        }

    def get_experiment_info(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "options": self.get_options_schema(),
        }


def frame(rows) -> pd.DataFrame:
    return pd.DataFrame(list(rows))
