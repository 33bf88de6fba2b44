"""
Configuration utilities for the polyp segmentation toolkit
Environment-driven defaults; per-run settings live in YAML run configs
"""

import os
from typing import Any, Dict

from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class Config:
    """Environment defaults shared by the CLI, the harness and the adapter client"""

    # Storage
    DATA_ROOT = os.getenv("POLYPSEG_DATA_ROOT", "./data")
    OUTPUT_DIR = os.getenv("POLYPSEG_OUTPUT_DIR", "./results")

    # Logging
    LOG_LEVEL = os.getenv("POLYPSEG_LOG_LEVEL", "INFO")

    # Execution
    WORKERS = int(os.getenv("POLYPSEG_WORKERS", "4"))
    ADAPTER_TIMEOUT = float(os.getenv("POLYPSEG_ADAPTER_TIMEOUT", "30"))

    @classmethod
    def get_config(cls) -> Dict[str, Any]:
        """Get all configuration as a dictionary"""
        return {
            "data_root": cls.DATA_ROOT,
            "output_dir": cls.OUTPUT_DIR,
            "log_level": cls.LOG_LEVEL,
            "workers": cls.WORKERS,
            "adapter_timeout": cls.ADAPTER_TIMEOUT,
        }

    @classmethod
    def validate_config(cls) -> bool:
        """Validate the configuration and create the storage directories"""
        errors = []

        if cls.WORKERS < 1:
            errors.append(f"POLYPSEG_WORKERS must be at least 1, got {cls.WORKERS}")

        if cls.ADAPTER_TIMEOUT <= 0:
            errors.append(f"POLYPSEG_ADAPTER_TIMEOUT must be positive, got {cls.ADAPTER_TIMEOUT}")

        for path in (cls.DATA_ROOT, cls.OUTPUT_DIR):
            if not os.path.exists(path):
                try:
                    os.makedirs(path, exist_ok=True)
                except Exception as e:
                    errors.append(f"Cannot create {path}: {e}")

        if errors:
            print("Configuration errors:")
            for error in errors:
                print(f"  - {error}")
            return False

        return True

    @classmethod
    def print_config(cls):
        """Print current configuration"""
        print("Current Configuration:")
        for key, value in cls.get_config().items():
            print(f"  {key}: {value}")
