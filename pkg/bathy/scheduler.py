import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, List, Sequence

logger = logging.getLogger(__name__)


class SweepScheduler:
    """
    Runs independent jobs of a sweep, inline or on a process pool.

    Attributes:
        threads (int): Number of worker processes; 1 runs every job in-process.
    """

    def __init__(self, threads: int = 1):
        """
        Initialize the SweepScheduler.

        Args:
            threads (int): Worker count, at least 1.
        """
        self.threads = max(int(threads), 1)

    def map(self, job: Callable[..., Any], arguments: Sequence[tuple]) -> List[Any]:
        """
        Run job(*args) for every entry of arguments.

        Args:
            job (callable): A picklable module-level function.
            arguments (sequence of tuple): Positional arguments per job.

        Returns:
            list: Results in submission order, whatever order the jobs finish in.

        Notes:
            - An exception raised by any job propagates after the pool shuts down.
        """
        if self.threads == 1 or len(arguments) <= 1:
            return [job(*args) for args in arguments]
        logger.info("running %d jobs on %d processes", len(arguments), self.threads)
        with ProcessPoolExecutor(max_workers=self.threads) as pool:
            futures = [pool.submit(job, *args) for args in arguments]
            return [future.result() for future in futures]
