from .session import CaptureResult, PoolConfig, RenderConfig, RenderError, pool_run, render

__all__ = ["CaptureResult", "PoolConfig", "RenderConfig", "RenderError", "pool_run", "render"]
