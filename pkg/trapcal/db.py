import logging
from pathlib import Path
from typing import Any, Dict, Iterable

from .config import ExperimentSpec, load_document
from .report import DEFAULT_SETTINGS

logger = logging.getLogger(__name__)


class TrapcalDB:
    """
    A trapcal workspace: `trapcal.yaml` with the declared experiments and
    settings, plus a `results` directory with one subdirectory per experiment.
    """

    def __init__(self, data_directory='.'):
        self.data_directory = Path(data_directory)
        self.config = load_document(self.data_directory / 'trapcal.yaml')

        self.results_directory = self.data_directory / 'results'
        self.results_directory.mkdir(exist_ok=True)

    def get_all_experiments(self) -> Iterable[ExperimentSpec]:
        for experiment_info in self.config.get('experiments') or []:
            yield ExperimentSpec.from_dict(experiment_info, self.data_directory)

    def get_settings(self) -> Dict[str, Any]:
        settings = dict(DEFAULT_SETTINGS)
        settings.update(self.config.get('settings') or {})
        unknown = set(settings) - set(DEFAULT_SETTINGS)
        if unknown:
            raise ValueError('Unknown settings: {0}'.format(', '.join(sorted(unknown))))
        return settings

    def get_results_directory(self, name: str) -> Path:
        return self.results_directory / name
