"""Default configuration creation utilities for hubforge."""
import configparser
import logging
from pathlib import Path
from platformdirs import user_config_dir

from .config import DEFAULT_SETTINGS

logger = logging.getLogger(__name__)

APP_NAME = "hubforge"
CONFIG_FILE_NAME = "config.ini"


def create_default_config(force=False):
    """Create a default configuration file holding the tolerance pack."""
    config_dir = Path(user_config_dir(APP_NAME, APP_NAME))
    config_dir.mkdir(parents=True, exist_ok=True)
    config_file_path = config_dir / CONFIG_FILE_NAME

    if config_file_path.exists() and not force:
        logger.info(
            "Config creation skipped: file already exists at %s",
            config_file_path)
        # Keep as print for CLI user feedback
        print(f"Config file already exists at: {config_file_path}\n"
              "Use --force to overwrite.")
        return config_file_path

    config = configparser.ConfigParser()
    config['DEFAULT'] = dict(DEFAULT_SETTINGS)

    with open(config_file_path, 'w', encoding='utf-8') as configfile:
        config.write(configfile)
    logger.info("Default configuration created at: %s", config_file_path)
    # Keep as print for CLI user feedback
    print(f"Default configuration created at: {config_file_path}")
    return config_file_path
