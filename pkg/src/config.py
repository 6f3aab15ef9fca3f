import os
from dotenv import load_dotenv

load_dotenv()

LOG_LEVEL = os.getenv("GPCP_LOG_LEVEL", "INFO").upper()
DEFAULT_SEED = int(os.getenv("GPCP_SEED", "0"))

# Jitter is relative to the mean of the covariance diagonal
JITTER_START = float(os.getenv("GPCP_JITTER", "1e-8"))
JITTER_MAX = float(os.getenv("GPCP_JITTER_MAX", "1e-2"))

DEFAULT_RESTARTS = int(os.getenv("GPCP_RESTARTS", "5"))
DEFAULT_MAX_ITER = int(os.getenv("GPCP_MAX_ITER", "200"))
