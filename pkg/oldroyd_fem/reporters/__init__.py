"""
Reporter base classes and utilities
"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Union


class BaseReporter(ABC):
    """Abstract base class for run output writers"""

    @abstractmethod
    def generate(self, result: Any, output_path: Union[str, Path]) -> None:
        """
        Write one output file from a run result

        Args:
            result: Certificate, trajectory, run summary or state, depending on the reporter
            output_path: Path to write the file to
        """
        pass

    def ensure_directory(self, filepath: Union[str, Path]) -> None:
        """Ensure the directory for a file exists"""
        directory = Path(filepath).parent
        if directory and str(directory) != ".":
            directory.mkdir(parents=True, exist_ok=True)
