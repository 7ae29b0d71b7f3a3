import os
import sys
from pathlib import Path

import numpy as np
import scipy
from colorama import Fore

from gpe_multigrid.logger import gpe_logger
from gpe_multigrid.util import settings


def startup_info(command: str, out_dir: Path):
    gpe_logger.log_group(
        f"Starting gpe_multigrid {command}",
        [
            f"Python version: {sys.version.split()[0]}",
            f"numpy {np.__version__}, scipy {scipy.__version__}",
            f"Process ID: {os.getpid()}",
            f"Log Level: {settings.log_level()} (GPE_LOG_LEVEL)",
            f"Assembly threads: {settings.num_threads()} (NUM_THREADS)",
            f"Identity checks: {'Enabled' if settings.check_identities() else 'Disabled'} (GPE_CHECK_IDENTITIES)",
            f"Output: {Fore.BLUE}{out_dir}{Fore.RESET}",
        ],
    )
    if settings.check_identities():
        gpe_logger.warning("Identity checks are enabled, every nonlinear iteration does extra tensor work.")
    check_output_dir(out_dir)


def check_output_dir(out_dir: Path | str):
    out_dir = Path(out_dir)
    if not out_dir.exists():
        out_dir.mkdir(parents=True, exist_ok=True)

    if not os.access(out_dir, os.W_OK):
        gpe_logger.error(f"Output directory {out_dir} is not writable. Please check permissions.")
        sys.exit(1)
    gpe_logger.debug(f"Output directory {out_dir} is valid and writable.")
