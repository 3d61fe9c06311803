"""
Bounded retries with exponential backoff for provider calls
"""

import logging
import time
from typing import Callable, TypeVar

from utils.errors import ProviderError, RetryableProviderError


logger = logging.getLogger(__name__)

T = TypeVar('T')


def call_with_retries(call: Callable[[], T], max_retries: int, backoff_base: float,
                      what: str, sleep: Callable[[float], None] = time.sleep) -> T:
    """
    Run call, retrying RetryableProviderError up to max_retries times

    The delay before retry i (0-based) is backoff_base * 2**i seconds.

    Raises:
        ProviderError: When the retries are exhausted
    """
    attempt = 0
    while True:
        try:
            return call()
        except RetryableProviderError as e:
            if attempt >= max_retries:
                raise ProviderError(f"{what} failed after {attempt + 1} attempts: {e}") from e
            delay = backoff_base * (2 ** attempt)
            logger.warning("%s failed (%s); retrying in %.1fs", what, e, delay)
            sleep(delay)
            attempt += 1
