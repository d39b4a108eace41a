"""Synthetic benchmark generators: AR(1) common factors driving bottom series.

Three presets (NgtvC, WeakC, PstvC) share one 13-node tree and differ only
in how strongly the factor loadings correlate the bottom series: negatively,
weakly, or positively.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .hierarchy import HierarchySpec, aggregate_bottom, build_hierarchy
from .panel import SeriesPanel

PRNG_IDENTITY = (
    "numpy PCG64 seeded via SeedSequence(seed, spawn_key=(role, node)); "
    "normal variates from Generator.standard_normal (ziggurat)"
)

PRESET_PARENTS: dict[int, int] = {
    2: 1, 3: 1, 4: 1,
    5: 2, 6: 2, 7: 2,
    8: 3, 9: 3, 10: 3,
    11: 4, 12: 4, 13: 4,
}

# (rho_i, theta_i) per bottom node; phi_i = sigma_i = 0.3 for every node.
_PRESET_LOADINGS: dict[str, dict[int, tuple[float, float]]] = {
    "NgtvC": {
        5: (0.1, 1.0), 6: (-0.1, -1.0), 7: (1.0, 0.1),
        8: (0.1, 1.0), 9: (-0.1, -1.0), 10: (-1.0, 0.1),
        11: (0.1, 1.0), 12: (-0.1, -1.0), 13: (1.0, 0.1),
    },
    "WeakC": {i: (0.1, 0.1) for i in range(5, 14)},
    "PstvC": {i: (1.0, 1.0) for i in range(5, 14)},
}

PRESET_NAMES = tuple(_PRESET_LOADINGS)

_FACTOR_ROLE = 0
_BOTTOM_ROLE = 1


@dataclass(frozen=True)
class SynthParams:
    """Generator parameters: AR coefficients, noise sds, factor loadings.

    ``phi`` and ``sigma`` cover every node; ``rho`` (root-factor loading)
    and ``theta`` (mid-factor loading) cover bottom nodes only.
    """

    phi: Mapping[int, float]
    sigma: Mapping[int, float]
    rho: Mapping[int, float]
    theta: Mapping[int, float]
    t_total: int = 100
    burn_in: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        for node, s in self.sigma.items():
            if s < 0:
                raise ValueError(f"sigma must be nonnegative, got {s} for node {node}")
        if self.t_total < 1:
            raise ValueError("t_total must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")


@dataclass(frozen=True)
class FactorPaths:
    """Common-factor sample paths for the root and mid-level nodes."""

    node_ids: tuple[int, ...]
    psi: np.ndarray

    def __post_init__(self) -> None:
        psi = np.asarray(self.psi, dtype=np.float64)
        if psi.shape[0] != len(self.node_ids):
            raise ValueError("psi row count must match node_ids")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)


def preset_params(name: str, *, t_total: int = 100, burn_in: int = 50, seed: int = 0) -> SynthParams:
    """Parameter set for one of the named presets."""
    if name not in _PRESET_LOADINGS:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    loadings = _PRESET_LOADINGS[name]
    nodes = [1, 2, 3, 4] + sorted(loadings)
    return SynthParams(
        phi={n: 0.3 for n in nodes},
        sigma={n: 0.3 for n in nodes},
        rho={n: loadings[n][0] for n in sorted(loadings)},
        theta={n: loadings[n][1] for n in sorted(loadings)},
        t_total=t_total,
        burn_in=burn_in,
        seed=seed,
    )


def preset_hierarchy() -> HierarchySpec:
    """The 13-node tree shared by all presets (3 mids, 3 bottoms each)."""
    return build_hierarchy(PRESET_PARENTS)


def _node_stream(seed: int, role: int, node: int) -> np.random.Generator:
    # One substream per (role, node) so adding nodes never perturbs the
    # noise consumed by existing ones.
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(role, node))))


def _ar1_path(phi: float, shocks: np.ndarray) -> np.ndarray:
    path = np.empty_like(shocks)
    prev = 0.0
    for k in range(shocks.shape[0]):
        prev = phi * prev + shocks[k]
        path[k] = prev
    return path


def generate_factors(params: SynthParams, h: HierarchySpec, *, keep_burn_in: bool = False) -> FactorPaths:
    """AR(1) common-factor paths for the root and each mid node.

    Paths start from zero, run for burn_in + t_total steps, and by default
    the burn-in prefix is discarded. ``keep_burn_in=True`` returns the full
    paths, as required by :func:`generate_bottom`.
    """
    n_steps = params.burn_in + params.t_total
    rows = []
    for node in h.upper_ids:
        rng = _node_stream(params.seed, _FACTOR_ROLE, node)
        shocks = params.sigma[node] * rng.standard_normal(n_steps)
        rows.append(_ar1_path(params.phi[node], shocks))
    psi = np.vstack(rows)
    if not keep_burn_in:
        psi = psi[:, params.burn_in:]
    return FactorPaths(node_ids=h.upper_ids, psi=psi)


def generate_bottom(params: SynthParams, factors: FactorPaths, mid_of: Mapping[int, int]) -> np.ndarray:
    """Bottom-level series driven by the root factor, a mid factor, and AR noise.

    ``factors`` must cover burn_in + t_total steps (see
    :func:`generate_factors` with ``keep_burn_in=True``); the burn-in
    prefix of the output is discarded. Rows are ascending bottom node ids.
    """
    n_steps = params.burn_in + params.t_total
    if factors.psi.shape[1] != n_steps:
        raise ValueError(
            f"factor paths must cover burn_in + t_total = {n_steps} steps, got {factors.psi.shape[1]}"
        )
    bottoms = sorted(params.rho)
    factor_pos = {n: i for i, n in enumerate(factors.node_ids)}
    root_path = factors.psi[0]
    out = np.empty((len(bottoms), params.t_total), dtype=np.float64)
    for r, node in enumerate(bottoms):
        if node not in mid_of:
            raise ValueError(f"no mid-level parent defined for bottom node {node}")
        mid = mid_of[node]
        if mid not in factor_pos:
            raise ValueError(f"mid node {mid} has no factor path")
        rng = _node_stream(params.seed, _BOTTOM_ROLE, node)
        noise = params.sigma[node] * rng.standard_normal(n_steps)
        drive = params.rho[node] * root_path + params.theta[node] * factors.psi[factor_pos[mid]] + noise
        out[r] = _ar1_path(params.phi[node], drive)[params.burn_in:]
    return out


def generate_dataset(
    preset: str | SynthParams,
    h: HierarchySpec | None = None,
    seed: int | None = None,
) -> SeriesPanel:
    """Generate a full coherent panel from a preset name or custom params.

    Named presets are tied to the canonical 13-node tree; passing a
    different hierarchy is an error. Upper-level rows come from exact
    aggregation, so the raw panel is coherent at tol = 0. Output is
    byte-identical for identical (preset, seed).
    """
    if isinstance(preset, str):
        params = preset_params(preset, seed=0 if seed is None else seed)
        tree = preset_hierarchy()
        if h is not None and h != tree:
            raise ValueError(f"preset {preset!r} requires its canonical 13-node hierarchy")
        h = tree
    else:
        params = preset if seed is None else replace(preset, seed=seed)
        if h is None:
            raise ValueError("custom SynthParams require an explicit hierarchy")
    if set(params.rho) != set(h.bottom_ids):
        raise ValueError("loadings must cover exactly the bottom nodes of the hierarchy")
    for node in h.node_ids:
        if node not in params.phi or node not in params.sigma:
            raise ValueError(f"phi/sigma missing for node {node}")

    factors = generate_factors(params, h, keep_burn_in=True)
    y_bottom = generate_bottom(params, factors, mid_of={b: h.parent[b] for b in h.bottom_ids})
    values = aggregate_bottom(h, y_bottom)
    train_len = min(max(int(round(0.7 * params.t_total)), 1), params.t_total - 1)
    return SeriesPanel.from_values(h, values, train_len)
