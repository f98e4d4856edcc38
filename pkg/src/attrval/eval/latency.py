from __future__ import annotations

import platform
import time
from datetime import datetime, timezone
from typing import Sequence

import numpy as np

from .systems import System


def hardware_descriptor() -> str:
    cpu = platform.processor() or ""
    try:
        with open("/proc/cpuinfo") as f:
            for line in f:
                if line.startswith("model name"):
                    cpu = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    return f"{cpu or 'unknown cpu'} | {platform.system()} {platform.machine()} | numpy {np.__version__}"


def latency_bench(system: System, queries: Sequence[Sequence[str]], warmup: int = 10,
                  min_queries: int = 100) -> dict:
    """Wall-clock time per query at batch size one, on a single worker."""
    if len(queries) == 0:
        raise ValueError("no queries to time")
    if len(queries) < min_queries:
        raise ValueError(f"need at least {min_queries} timed queries, got {len(queries)}")
    for q in list(queries[:warmup]):
        system.predict([q])
    times = []
    started = datetime.now(timezone.utc).isoformat()
    for q in queries:
        t0 = time.perf_counter()
        system.predict([q])
        times.append((time.perf_counter() - t0) * 1000.0)
    return {
        "system": system.name,
        "n_queries": len(times),
        "warmup": warmup,
        "mean_ms": float(np.mean(times)),
        "std_ms": float(np.std(times)),
        "hardware": hardware_descriptor(),
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
    }
