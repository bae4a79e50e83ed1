"""Run manifests: one per CLI invocation, enough to reproduce the outputs."""

import json
import platform
import time
from dataclasses import asdict, dataclass, field


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    config_hash: str
    seed: int
    versions: dict = field(default_factory=dict)
    wall_time_s: float = 0.0
    outputs: list = field(default_factory=list)

    @classmethod
    def start(cls, subcommand, config, config_hash, seed):
        import numpy
        import scipy

        from . import __version__, kernels
        m = cls(subcommand, config, config_hash, int(seed))
        m.versions = {
            "laughlin_lab": __version__,
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
            "kernel_backend": kernels.BACKEND,
        }
        m._t0 = time.perf_counter()
        return m

    def finish(self, outputs):
        self.wall_time_s = time.perf_counter() - getattr(self, "_t0", time.perf_counter())
        self.outputs = [str(p) for p in outputs]
        return self

    def write(self, path):
        with open(path, "w") as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True)
            f.write("\n")
        return path
