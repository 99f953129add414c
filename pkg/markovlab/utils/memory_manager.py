import gc
import os

import psutil

from markovlab.config import settings
from markovlab.exceptions import ResourceError
from markovlab.utils.logger import get_logger

logger = get_logger(__name__)

BYTES_PER_ENTRY = 8  # float64


class MemoryManager:
    def __init__(self, memory_threshold_mb: int = settings.MEMORY_THRESHOLD_MB):
        """
        Guard dense matrix allocations against available memory.

        Args:
            memory_threshold_mb: Upper bound in MB for the dense matrices of one trial
        """
        self.memory_threshold_mb = memory_threshold_mb
        self.process = psutil.Process(os.getpid())

    def get_memory_usage(self) -> dict:
        try:
            memory_info = self.process.memory_info()
            return {
                "rss_mb": memory_info.rss / 1024 / 1024,
                "available_system_mb": psutil.virtual_memory().available / 1024 / 1024,
            }
        except psutil.Error as e:
            logger.error(f"Error getting memory usage: {e}")
            return {}

    def dense_matrix_mb(self, n: int, count: int = 1) -> float:
        return count * n * n * BYTES_PER_ENTRY / 1024 / 1024

    def ensure_dense_budget(self, n: int, count: int, workers: int = 1) -> None:
        """
        Raise ResourceError if `workers` trials holding `count` dense n x n matrices
        each would not fit.
        """
        needed = self.dense_matrix_mb(n, count) * workers
        available = self.get_memory_usage().get("available_system_mb", float("inf"))
        limit = min(self.memory_threshold_mb, available)
        if needed > limit:
            raise ResourceError(
                f"n={n} needs about {needed:.0f} MB for {count} dense matrices x {workers} workers, "
                f"limit is {limit:.0f} MB"
            )

    def monitor_memory_usage(self, operation_name: str = "operation") -> dict:
        memory_info = self.get_memory_usage()
        logger.debug(f"Memory usage after {operation_name}: {memory_info.get('rss_mb', 0):.2f} MB")
        if memory_info.get("rss_mb", 0) > self.memory_threshold_mb:
            logger.warning(f"Memory usage above threshold after {operation_name}, collecting")
            gc.collect()
        return memory_info


memory_manager = MemoryManager()


def get_memory_manager() -> MemoryManager:
    return memory_manager
