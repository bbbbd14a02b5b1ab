"""Command-line orchestration of the surprisal evaluation pipeline."""

from .config import ConfigFileError, RunConfig, load_config
from .main import main
