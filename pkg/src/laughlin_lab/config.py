"""JSON run configuration: physical dials, quasi-hole lists, named potentials,
chain settings.  The schema is documented in the README; hashes of the
canonical JSON identify runs in manifests.
"""

import hashlib
import json
import math

import numpy as np

from .grid import Grid
from .model import CorrelationFactor, PlasmaParams, PotentialSpec, QuasiHoleSet
from .sampler import ChainConfig


def _r2(x):
    x = np.asarray(x, dtype=float)
    return np.sum(x * x, axis=-1)


def make_potential(name, params=None):
    """Named scalar fields on the plane; all act on (n, 2) arrays."""
    p = dict(params or {})
    if name == "quadratic":
        return lambda x: _r2(x)
    if name == "constant":
        c = float(p.get("c", 1.0))
        return lambda x: np.full(np.asarray(x).shape[:-1], c)
    if name == "gaussian":
        a = float(p.get("amplitude", 1.0))
        s = float(p.get("width", 1.0))
        return lambda x: a * np.exp(-_r2(x) / (2.0 * s * s))
    if name == "mexican_hat":
        # quadratic trap with a repulsive bump: one maximum at the origin
        a = float(p.get("height", 4.0))
        s = float(p.get("width", 0.5))
        return lambda x: _r2(x) + a * np.exp(-_r2(x) / (2.0 * s * s))
    if name == "double_well":
        a = float(p.get("separation", 1.0))
        return lambda x: (np.asarray(x, dtype=float)[..., 0] ** 2 - a * a) ** 2 / (4 * a * a) \
            + np.asarray(x, dtype=float)[..., 1] ** 2
    raise ValueError(f"unknown potential {name!r}")


def potential_spec_from(cfg):
    """PotentialSpec from {'v': {'name', 'params'}, 'w': {...}} plus 'lambda'."""
    vcfg = cfg.get("potential", {}).get("v", {"name": "quadratic"})
    wcfg = cfg.get("potential", {}).get("w", {"name": "gaussian"})
    v = make_potential(vcfg.get("name"), vcfg.get("params"))
    w = make_potential(wcfg.get("name"), wcfg.get("params"))
    return PotentialSpec(v=v, w=w, lam=float(cfg.get("lambda", 0.0)))


def params_from(cfg):
    p = cfg["params"]
    return PlasmaParams(B=float(p.get("B", 1.0)), ell=int(p["ell"]), N=int(p["N"]))


def holes_from(cfg):
    return QuasiHoleSet.from_pairs(cfg.get("quasi_holes", []))


def correlation_from(cfg):
    holes = holes_from(cfg)
    if holes.positions.shape[0] == 0:
        return CorrelationFactor.none()
    return CorrelationFactor.quasi_holes(holes)


def chain_from(cfg, seed_override=None):
    c = dict(cfg.get("chain", {}))
    if seed_override is not None:
        c["seed"] = int(seed_override)
    return ChainConfig(
        steps=int(c.get("steps", 20000)),
        burn_in=int(c.get("burn_in", 2000)),
        proposal_scale=c.get("proposal_scale"),
        seed=int(c.get("seed", 0)),
        chains=int(c.get("chains", 1)),
        thin=int(c.get("thin", 1)),
    )


def grid_from(cfg, params=None):
    g = cfg.get("grid")
    if g is None:
        from .sampler import default_grid
        if params is None:
            raise ValueError("no grid block and no params to derive one")
        return default_grid(params)
    if "half_extent" in g:
        return Grid.square(float(g["half_extent"]), float(g["h"]),
                           center=tuple(g.get("center", (0.0, 0.0))))
    return Grid(tuple(g["origin"]), float(g["h"]), int(g["nx"]), int(g["ny"]))


def load_config(path):
    with open(path) as f:
        return json.load(f)


def canonical_json(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg):
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()[:16]
