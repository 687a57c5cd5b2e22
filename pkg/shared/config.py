import logging
import os

from dotenv import load_dotenv
from temporalio.client import Client
from temporalio.service import TLSConfig

load_dotenv(override=True)

logger = logging.getLogger(__name__)

# Compile search defaults
RPIPE_WORKERS = int(os.getenv("RPIPE_WORKERS", "1"))
RPIPE_DEGREE_LIMITS = os.getenv("RPIPE_DEGREE_LIMITS", "2,4,8,0")
RPIPE_PER_TRY_TIMEOUT = float(os.getenv("RPIPE_PER_TRY_TIMEOUT", "60"))
RPIPE_TOTAL_TIMEOUT = float(os.getenv("RPIPE_TOTAL_TIMEOUT", "300"))
RPIPE_LOG_LEVEL = os.getenv("RPIPE_LOG_LEVEL", "INFO")
RPIPE_REPORT_DIR = os.getenv("RPIPE_REPORT_DIR", "./reports")

# Temporal connection settings
TEMPORAL_ADDRESS = os.getenv("TEMPORAL_ADDRESS", "localhost:7233")
TEMPORAL_NAMESPACE = os.getenv("TEMPORAL_NAMESPACE", "default")
TEMPORAL_TASK_QUEUE = os.getenv("TEMPORAL_TASK_QUEUE", "rpipe-compile-queue")

# Authentication settings
TEMPORAL_TLS_CERT = os.getenv("TEMPORAL_TLS_CERT", "")
TEMPORAL_TLS_KEY = os.getenv("TEMPORAL_TLS_KEY", "")
TEMPORAL_API_KEY = os.getenv("TEMPORAL_API_KEY", "")


def parse_degree_limits(text: str) -> tuple[int, ...]:
    """'2,4,8,0' -> (2, 4, 8, 0)"""
    return tuple(int(part) for part in text.split(",") if part.strip())


async def get_temporal_client() -> Client:
    """
    Creates a Temporal client based on environment configuration.
    Supports local server, mTLS, and API key authentication methods.
    """
    # Default to no TLS for local development
    tls_config = False
    logger.info(
        "Client connection: [%s], Namespace: [%s], Task Queue: [%s]",
        TEMPORAL_ADDRESS,
        TEMPORAL_NAMESPACE,
        TEMPORAL_TASK_QUEUE,
    )

    # Configure mTLS if certificate and key are provided
    if TEMPORAL_TLS_CERT and TEMPORAL_TLS_KEY:
        logger.info("TLS cert: %s, key: %s", TEMPORAL_TLS_CERT, TEMPORAL_TLS_KEY)
        with open(TEMPORAL_TLS_CERT, "rb") as f:
            client_cert = f.read()
        with open(TEMPORAL_TLS_KEY, "rb") as f:
            client_key = f.read()
        tls_config = TLSConfig(
            client_cert=client_cert,
            client_private_key=client_key,
        )

    # Use API key authentication if provided
    if TEMPORAL_API_KEY:
        return await Client.connect(
            TEMPORAL_ADDRESS,
            namespace=TEMPORAL_NAMESPACE,
            api_key=TEMPORAL_API_KEY,
            tls=True,  # Always use TLS with API key
        )

    # Use mTLS or local connection
    return await Client.connect(
        TEMPORAL_ADDRESS,
        namespace=TEMPORAL_NAMESPACE,
        tls=tls_config,
    )
