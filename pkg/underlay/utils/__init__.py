from .reproducibility import stream_generator, deterministic_sum, mean_and_stderr

__all__ = ["stream_generator", "deterministic_sum", "mean_and_stderr"]
