"""
CSV energy trace, one row per time level
"""

import csv
import logging
from pathlib import Path
from typing import List, Union

from oldroyd_fem.certify import format_value
from oldroyd_fem.stepper import Trajectory
from oldroyd_fem.reporters import BaseReporter

logger = logging.getLogger(__name__)

TRACE_COLUMNS = [
    "n",
    "t",
    "F",
    "kinetic",
    "entropy",
    "visc_dissipation",
    "stress_dissipation",
    "diffusion_dissipation",
    "forcing_pairing",
    "slack",
    "picard_iters",
    "min_eig_stress",
]


class TraceReporter(BaseReporter):
    """
    Writes the energy ledger of a trajectory as CSV, one row per accepted
    step. The header is written even when no step converged.
    """

    def rows(self, trajectory: Trajectory) -> List[List[str]]:
        rows: List[List[str]] = []
        for b in trajectory.breakdowns:
            rows.append(
                [
                    str(b.step),
                    format_value(b.time),
                    format_value(b.total),
                    format_value(b.kinetic),
                    format_value(b.entropy),
                    format_value(b.visc_dissipation),
                    format_value(b.stress_dissipation),
                    format_value(b.diffusion_dissipation),
                    format_value(b.forcing_pairing),
                    format_value(b.slack),
                    str(b.iterations),
                    format_value(b.min_eig_stress),
                ]
            )
        return rows

    def generate(self, result: Trajectory, output_path: Union[str, Path]) -> None:
        self.ensure_directory(output_path)

        with open(output_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(TRACE_COLUMNS)
            writer.writerows(self.rows(result))
        logger.info("wrote trace %s (%d steps)", output_path, len(result.breakdowns))
