"""
Flat key = value certificate files
"""

import logging
from pathlib import Path
from typing import Union

from oldroyd_fem.certify import certificate_lines
from oldroyd_fem.models import PropertyResult, RunCertificate
from oldroyd_fem.reporters import BaseReporter

logger = logging.getLogger(__name__)


class CertificateReporter(BaseReporter):
    """Writes run certificates and property-suite results, one key per line"""

    def render(self, result: Union[RunCertificate, PropertyResult]) -> str:
        return "\n".join(certificate_lines(result.to_dict().items())) + "\n"

    def generate(self, result: Union[RunCertificate, PropertyResult], output_path: Union[str, Path]) -> None:
        self.ensure_directory(output_path)

        with open(output_path, "w", encoding="utf-8") as f:
            f.write(self.render(result))
        logger.info("wrote certificate %s", output_path)
