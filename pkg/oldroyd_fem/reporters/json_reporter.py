"""
JSON run summary
"""

import json
import math
from pathlib import Path
from typing import Any, Union

from oldroyd_fem.models import RunSummary
from oldroyd_fem.reporters import BaseReporter


def _finite(value: Any) -> Any:
    """inf and nan become strings; JSON has no literal for them"""
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    return value


class JSONReporter(BaseReporter):
    """Generates JSON run summaries"""

    def generate(self, result: RunSummary, output_path: Union[str, Path]) -> None:
        """
        Generate a JSON report

        Args:
            result: Run summary
            output_path: Path to write JSON file
        """
        self.ensure_directory(output_path)

        with open(output_path, "w", encoding="utf-8") as f:
            json.dump(_finite(result.to_dict()), f, indent=2)
