# decorators.py
import functools
import time


def timed(func):
    """Decorator to run a runner step, logging it and recording its wall-clock time in the manifest."""

    @functools.wraps(func)
    def wrapper(self, *args, **kwargs):
        name = func.__name__.lstrip("_")
        self.logger.debug(f"Step {name} started")
        start = time.perf_counter()
        try:
            result = func(self, *args, **kwargs)
        except Exception as e:
            self.logger.error(f"Step {name} failed with exception: {e}")
            raise
        elapsed = time.perf_counter() - start
        if getattr(self, "manifest", None) is not None:
            self.manifest.timings[name] = elapsed
        self.logger.debug(f"Step {name} completed in {elapsed:.3f}s")
        return result

    return wrapper
