# tracing_topk/core/config.py
import os
from dotenv import load_dotenv

load_dotenv()

WORKERS = int(os.getenv("TRACING_WORKERS", "1"))
LOG_LEVEL = os.getenv("TRACING_LOG_LEVEL", "INFO").upper()
RESULTS_DIR = os.getenv("TRACING_RESULTS_DIR", "results")

# service bind
HOST = os.getenv("TRACING_HOST", "0.0.0.0")
PORT = int(os.getenv("TRACING_PORT", "8080"))

# trials accepted per request on the HTTP surface
MAX_API_TRIALS = int(os.getenv("TRACING_MAX_API_TRIALS", "20000"))
