#!/usr/bin/env python3
"""
Experiment Registry
Maps CLI subcommand names to experiment objects
"""

import logging
from typing import Any, Dict, List, Optional

from app.experiments.base_experiment import BaseExperiment
from app.experiments.combinatorics_experiments import SelfcheckCombinatoricsExperiment
from app.experiments.ensemble_experiments import EnsembleExperiment
from app.experiments.inference_experiments import BoundaryExperiment, LdpExperiment, PosteriorExperiment
from app.experiments.sampling_experiments import DistCheckExperiment, SampleExperiment
from app.experiments.verification_experiments import VerifyExperiment

logger = logging.getLogger(__name__)


class ExperimentRegistry:
    """
    Registry for the CLI experiments
    """

    def __init__(self):
        self.experiments: Dict[str, BaseExperiment] = {}
        self._register_default_experiments()

    def _register_default_experiments(self):
        default_experiments = [
            SampleExperiment(),
            SelfcheckCombinatoricsExperiment(),
            EnsembleExperiment(),
            BoundaryExperiment(),
            LdpExperiment(),
            VerifyExperiment(),
            PosteriorExperiment(),
            DistCheckExperiment(),
        ]
        for experiment in default_experiments:
            self.register_experiment(experiment)

    def register_experiment(self, experiment: BaseExperiment) -> bool:
        if not isinstance(experiment, BaseExperiment):
            logger.error(f"❌ Experiment must be instance of BaseExperiment: {type(experiment)}")
            return False
        if experiment.name in self.experiments:
            logger.warning(f"⚠️ Experiment {experiment.name} already registered, replacing...")
        self.experiments[experiment.name] = experiment
        logger.debug(f"📝 Registered experiment: {experiment.name}")
        return True

    def get_experiment(self, name: str) -> Optional[BaseExperiment]:
        return self.experiments.get(name)

    def get_experiment_names(self) -> List[str]:
        return list(self.experiments.keys())

    def get_experiments_info(self) -> List[Dict[str, Any]]:
        return [e.get_experiment_info() for e in self.experiments.values()]


experiment_registry = ExperimentRegistry()
