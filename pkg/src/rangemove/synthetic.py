"""Seeded random instance generators.

A generator spec string looks like ``"grid:w=8,h=6,l=5,seed=3"``; see
:func:`from_spec`.
"""

from __future__ import annotations

from typing import Dict

import numpy as np

from .energy import EnergyModel, GraphTopology
from .errors import ContractViolation
from .priors import make_prior


def random_model(topology: GraphTopology, labels: int, prior_kind: str = "tq", trunc: int = 2,
                 seed: int = 0, weight: float = 2.0, unary_scale: float = 10.0,
                 random_weights: bool = False) -> EnergyModel:
    """Uniform random unaries on ``[0, unary_scale)``."""
    rng = np.random.default_rng(seed)
    unary = rng.uniform(0.0, unary_scale, (topology.node_count, labels))
    if random_weights:
        w = rng.uniform(0.0, 2.0 * weight, topology.edge_count)
    else:
        w = weight
    return EnergyModel.build(topology, unary, make_prior(prior_kind, trunc, labels), w)


def chain_model(n: int = 10, labels: int = 6, prior_kind: str = "tq", trunc: int = 2,
                seed: int = 0, weight: float = 2.0) -> EnergyModel:
    return random_model(GraphTopology.chain(n), labels, prior_kind, trunc, seed, weight)


def grid_model(width: int = 3, height: int = 3, labels: int = 4, prior_kind: str = "tq",
               trunc: int = 2, seed: int = 0, weight: float = 2.0) -> EnergyModel:
    return random_model(GraphTopology.grid4(width, height), labels, prior_kind, trunc, seed, weight)


def piecewise_constant(width: int, height: int, labels: int, rng: np.random.Generator,
                       regions: int = 6) -> np.ndarray:
    """Label image made of nearest-seed (Voronoi) regions with random labels."""
    sx = rng.uniform(0, width, regions)
    sy = rng.uniform(0, height, regions)
    lab = rng.integers(0, labels, regions)
    yy, xx = np.mgrid[0:height, 0:width]
    d = (xx[..., None] - sx) ** 2 + (yy[..., None] - sy) ** 2
    return lab[np.argmin(d, axis=-1)].ravel()


def bimodal_model(width: int = 20, height: int = 20, labels: int = 16, trunc: int = 3,
                  seed: int = 0, weight: float = 10.0, scale: float = 2.0, decoy: float = 3.0,
                  noise: float = 2.0, prior_kind: str = "tq") -> EnergyModel:
    """Grid whose unaries have two wells per pixel.

    One well sits at a piecewise-constant true label, the other at a random
    decoy label and is ``decoy`` deeper or shallower at random; both are
    quadratic with curvature ``scale`` and uniform noise is added.
    """
    rng = np.random.default_rng(seed)
    n = width * height
    truth = piecewise_constant(width, height, labels, rng)
    other = rng.integers(0, labels, n)
    lab = np.arange(labels)[None, :]
    well_a = scale * (lab - truth[:, None]) ** 2
    well_b = scale * (lab - other[:, None]) ** 2 + rng.uniform(-decoy, decoy, n)[:, None]
    unary = np.minimum(well_a, well_b) + rng.uniform(0.0, noise, (n, labels))
    unary -= unary.min(axis=1, keepdims=True)
    topo = GraphTopology.grid4(width, height)
    return EnergyModel.build(topo, unary, make_prior(prior_kind, trunc, labels), weight)


_KEYS = {"n": int, "w": int, "h": int, "l": int, "t": int, "seed": int,
         "weight": float, "prior": str, "scale": float, "decoy": float, "noise": float}


def parse_spec(spec: str):
    kind, _, rest = spec.partition(":")
    params: Dict[str, object] = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        key = key.strip().lower()
        if not eq or key not in _KEYS:
            raise ContractViolation(f"bad generator parameter {item!r} in {spec!r}")
        params[key] = _KEYS[key](val.strip())
    return kind.strip().lower(), params


def from_spec(spec: str, prior_kind: str | None = None, trunc: int | None = None) -> EnergyModel:
    """Build a model from ``kind:key=value,...``.

    Kinds: ``chain`` (n, l), ``grid`` (w, h, l), ``bimodal`` (w, h, l,
    scale, decoy, noise).  Shared keys: t, seed, weight, prior.  Explicit
    ``prior_kind`` / ``trunc`` arguments override the spec.
    """
    kind, p = parse_spec(spec)
    prior = prior_kind or p.get("prior", "tq")
    T = trunc if trunc is not None else p.get("t")
    seed = p.get("seed", 0)
    if kind == "chain":
        return chain_model(p.get("n", 10), p.get("l", 6), prior, T or 2, seed, p.get("weight", 2.0))
    if kind == "grid":
        return grid_model(p.get("w", 3), p.get("h", 3), p.get("l", 4), prior, T or 2, seed,
                          p.get("weight", 2.0))
    if kind == "bimodal":
        return bimodal_model(p.get("w", 20), p.get("h", 20), p.get("l", 16), T or 3, seed,
                             p.get("weight", 10.0), p.get("scale", 2.0), p.get("decoy", 3.0),
                             p.get("noise", 2.0), prior)
    raise ContractViolation(f"unknown generator {kind!r}; use chain, grid or bimodal")
