"""
settings.py

Runtime switches read from the environment (and an optional .env file):

    GPE_LOG_LEVEL         logger level, default INFO
    NUM_THREADS           worker threads for cell-chunked assembly, default 1
    GPE_CHECK_IDENTITIES  "1" re-checks the tensor contraction identities every nonlinear iteration

Author: Nathan Swanson
"""

import os

from dotenv import load_dotenv

load_dotenv()


def num_threads() -> int:
    raw = os.environ.get("NUM_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(value, 1)


def check_identities() -> bool:
    return os.environ.get("GPE_CHECK_IDENTITIES", "0") == "1"


def log_level() -> str:
    return os.environ.get("GPE_LOG_LEVEL", "INFO").upper()
