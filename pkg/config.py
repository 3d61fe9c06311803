"""
Configuration Manager for the insight generation pipeline
Loads settings from JSON/YAML files and layers environment variables and
command-line overrides on top of built-in defaults
"""

import copy
import json
import logging
import os
from typing import Any, Dict, Mapping, Optional

import yaml

from models.theme import HyperParams
from utils.errors import ContractError


logger = logging.getLogger(__name__)


class ConfigurationError(Exception):
    """Raised when configuration is invalid or missing required settings"""
    pass


DEFAULTS: Dict[str, Any] = {
    'embedding': {
        'endpoint': '',
        'api_key': '',
        'model': 'mock-embed-64',
        'mock_dim': 64,
        'batch_size': 32,
        'timeout': 30.0,
    },
    'llm': {
        'endpoint': '',
        'api_key': '',
        'model': 'mock-llm',
        'judge_model': '',
        'temperature': 0.7,
        'max_output_tokens': 4000,
        'timeout': 120.0,
    },
    'pipeline': {
        'hyperparameters': HyperParams().to_dict(),
        'context_budget': 24000,
        'traversal': 'bfs',
        'clusterer': 'kmeans',
        'max_iter': 300,
        'tol': 1e-4,
        'sim_query': 'question',
        'parse_retries': 2,
        'provider_retries': 3,
        'backoff_base': 0.5,
        'parallelism': 4,
    },
    'evaluation': {
        'insight_repeats': 10,
        'base_alpha': 0.05,
        'criteria': {
            'novelty': 'Novelty: how much new information or ideas the insights introduce',
            'diversity': 'Diversity: how distinct the insights are from one another',
            'relevance': 'Relevance: how well the insights address the original question',
            'depth': 'Depth: whether the insights are substantive rather than superficial',
        },
    },
    'logging': {
        'level': 'INFO',
    },
}

# Environment variable -> dotted config key
ENVIRONMENT_KEYS = {
    'EMBED_ENDPOINT': 'embedding.endpoint',
    'EMBED_API_KEY': 'embedding.api_key',
    'EMBED_MODEL': 'embedding.model',
    'LLM_ENDPOINT': 'llm.endpoint',
    'LLM_API_KEY': 'llm.api_key',
    'LLM_MODEL': 'llm.model',
    'INSIGHTGEN_SEED': 'pipeline.hyperparameters.seed',
}


def _deep_merge(base: Dict[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(base.get(key), dict):
            _deep_merge(base[key], value)
        else:
            base[key] = copy.deepcopy(value)
    return base


def _set_dotted(target: Dict[str, Any], key: str, value: Any) -> None:
    parts = key.split('.')
    node = target
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


class Config:
    """
    Configuration manager

    Precedence: overrides (command-line flags) > environment variables >
    config file > DEFAULTS. Secrets are only ever read from the file or the
    environment and are never logged.
    """

    # Required sections when a configuration file is given
    REQUIRED_SETTINGS = [
        'embedding',
        'llm',
        'pipeline'
    ]

    def __init__(self, config_file: Optional[str] = None,
                 overrides: Optional[Mapping[str, Any]] = None,
                 environ: Optional[Mapping[str, str]] = None):
        """
        Initialize Config

        Args:
            config_file: Optional path to a JSON or YAML configuration file
            overrides: Dotted keys set from command-line flags
            environ: Environment mapping (defaults to os.environ)

        Raises:
            ConfigurationError: If the file doesn't exist, is invalid, or misses required settings
        """
        self.config_file = config_file
        self._file_data: Dict[str, Any] = {}
        if config_file:
            self._load_config()
            self._validate_required_settings()

        self._config_data = _deep_merge(copy.deepcopy(DEFAULTS), self._file_data)
        self._apply_environment(os.environ if environ is None else environ)
        for key, value in (overrides or {}).items():
            if value is not None:
                _set_dotted(self._config_data, key, value)

    def _load_config(self):
        """
        Load configuration from JSON or YAML file

        Raises:
            ConfigurationError: If file doesn't exist or cannot be parsed
        """
        if not os.path.exists(self.config_file):
            raise ConfigurationError(f"Configuration file not found: {self.config_file}")

        if not self.config_file.endswith(('.json', '.yaml', '.yml')):
            raise ConfigurationError(
                "Unsupported configuration file format. Use .json, .yaml, or .yml"
            )

        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                if self.config_file.endswith('.json'):
                    self._file_data = json.load(f)
                else:
                    self._file_data = yaml.safe_load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Invalid JSON in configuration file: {e}")
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Invalid YAML in configuration file: {e}")
        except OSError as e:
            raise ConfigurationError(f"Error reading configuration file: {e}")

    def _validate_required_settings(self):
        """
        Validate that all required settings are present in the configuration file

        Raises:
            ConfigurationError: If any required settings are missing
        """
        if not isinstance(self._file_data, dict):
            raise ConfigurationError(
                f"Configuration must be a dictionary/object, got {type(self._file_data).__name__}"
            )

        missing_settings = [s for s in self.REQUIRED_SETTINGS if s not in self._file_data]
        if missing_settings:
            raise ConfigurationError(
                f"Missing required configuration settings: {', '.join(missing_settings)}"
            )

    def _apply_environment(self, environ: Mapping[str, str]):
        for variable, key in ENVIRONMENT_KEYS.items():
            value = environ.get(variable)
            if value:
                if key.endswith('.seed'):
                    try:
                        value = int(value)
                    except ValueError:
                        raise ConfigurationError(f"{variable} must be an integer, got '{value}'")
                _set_dotted(self._config_data, key, value)

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get configuration value by key

        Args:
            key: Configuration key (supports nested keys with dot notation, e.g., 'llm.model')
            default: Default value if key not found

        Returns:
            Configuration value or default
        """
        value = self._config_data
        for k in key.split('.'):
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default
        return value

    def hyperparameters(self) -> HyperParams:
        """
        Build HyperParams from the pipeline section

        Raises:
            ConfigurationError: If a hyperparameter is out of range
        """
        try:
            return HyperParams.from_dict(self.get('pipeline.hyperparameters', {}))
        except (ContractError, TypeError) as e:
            raise ConfigurationError(f"Invalid hyperparameters: {e}")

    def embedding_settings(self) -> Dict[str, Any]:
        return dict(self.get('embedding', {}))

    def llm_settings(self) -> Dict[str, Any]:
        return dict(self.get('llm', {}))

    def judge_settings(self) -> Dict[str, Any]:
        """Judge uses the LLM_* family; judge_model overrides the model name"""
        settings = self.llm_settings()
        if settings.get('judge_model'):
            settings['model'] = settings['judge_model']
        return settings

    def context_budget(self) -> int:
        budget = int(self.get('pipeline.context_budget', 24000))
        if budget < 1:
            raise ConfigurationError("pipeline.context_budget must be >= 1")
        return budget

    def parallelism(self) -> int:
        return max(1, int(self.get('pipeline.parallelism', 1)))

    def as_dict(self) -> Dict[str, Any]:
        """Merged configuration with credentials masked"""
        data = copy.deepcopy(self._config_data)
        for section in ('embedding', 'llm'):
            if data.get(section, {}).get('api_key'):
                data[section]['api_key'] = '***'
        return data

    def __repr__(self) -> str:
        return f"Config(file='{self.config_file}')"
