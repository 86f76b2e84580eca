"""Seeded Monte-Carlo campaigns behind the command line.

Realization ``i`` of a campaign always uses child ``i`` of
``SeedSequence(seed)``, so results do not depend on the worker count and
different variants of one campaign share their random environments.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

from .channel import Scene
from .clusters import PathKind
from .config import Clutter, Condition, ScenarioParams, ensure_valid, preset
from .statistics import CorrelationEstimate, acf, merge_estimates, rms_delay_spread

FIG4_GRID = ((10e-9, 2.0), (10e-9, 10.0), (50e-9, 2.0), (50e-9, 10.0))  # (beta_dmc, s_dmc_tau)
FIG6_CLUSTERS = {Clutter.SA: 12, Clutter.SB: 25}


def realization_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    if n < 1:
        raise ValueError("need at least one realization")
    return np.random.SeedSequence(seed).spawn(n)


def _chunks(n: int, parts: int):
    edges = np.linspace(0, n, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_indexed(task: Callable, args, seed: int, n: int, workers: int | None = None) -> list:
    """Run ``task(args, seeds)`` over contiguous slices of the realization seeds
    and concatenate the per-slice lists in index order."""
    seeds = realization_seeds(seed, n)
    if workers is None:
        workers = os.cpu_count() or 1
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1 or n == 1:
        return list(task(args, seeds))
    slices = _chunks(n, min(workers * 4, n))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(task, args, seeds[a:b]) for a, b in slices]
        out = []
        for fut in futures:
            out.extend(fut.result())
    return out


def draw_scenes(params: ScenarioParams, seeds: Sequence[np.random.SeedSequence]) -> list[Scene]:
    ensure_valid(params)
    return [Scene.draw(params, np.random.default_rng(s)) for s in seeds]


# --- delay spread ---------------------------------------------------------------

def realization_ds(scene: Scene, t: float = 0.0, q: int = 0, p: int = 0, smc_only: bool = False) -> float:
    """RMS delay spread of the paths seen by element pair (q, p) at time ``t``.

    ``smc_only`` drops the DMCs from the same environment.
    """
    real = scene.realize([t])
    keep = real.visible[q, p].copy()
    if smc_only:
        keep &= real.kinds != PathKind.DMC.value
    powers = real.powers[0, keep]
    delays = real.delays[0, q, p, keep]
    nonzero = powers > 0
    return rms_delay_spread(powers[nonzero], delays[nonzero])


def _ds_task(args, seeds):
    params, smc_only, t, q, p = args
    return [realization_ds(s, t, q, p, smc_only) for s in draw_scenes(params, seeds)]


def _ds_multi_task(args, seeds):
    """Several (params, smc_only) variants evaluated on shared seeds."""
    variants, t, q, p = args
    rows = []
    for s in seeds:
        row = []
        for params, smc_only in variants:
            scene = Scene.draw(params, np.random.default_rng(s))
            row.append(realization_ds(scene, t, q, p, smc_only))
        rows.append(row)
    return rows


def ds_samples(params: ScenarioParams, seed: int, n: int, smc_only: bool = False, t: float = 0.0,
               q: int = 0, p: int = 0, workers: int | None = 1) -> np.ndarray:
    """Per-realization RMS delay spreads in seconds."""
    ensure_valid(params)
    return np.array(run_indexed(_ds_task, (params, smc_only, t, q, p), seed, n, workers))


def ds_variants(variants: dict[str, tuple[ScenarioParams, bool]], seed: int, n: int, t: float = 0.0,
                q: int = 0, p: int = 0, workers: int | None = 1) -> dict[str, np.ndarray]:
    """Delay-spread samples for labeled ``(params, smc_only)`` variants on common seeds."""
    for params, _ in variants.values():
        ensure_valid(params)
    rows = run_indexed(_ds_multi_task, (list(variants.values()), t, q, p), seed, n, workers)
    table = np.array(rows, dtype=float).reshape(n, len(variants))
    return {label: table[:, i] for i, label in enumerate(variants)}


def dmc_variants(params: ScenarioParams) -> dict[str, tuple[ScenarioParams, bool]]:
    return {"SMC": (params, True), "SMC+DMC": (params, False)}


def fig4_variants(params: ScenarioParams) -> dict[str, tuple[ScenarioParams, bool]]:
    """2 x 2 grid of (beta_dmc, s_dmc_tau), each with and without DMCs."""
    out = {}
    for beta, s in FIG4_GRID:
        cell = params.with_overrides(beta_dmc=beta, s_dmc_tau=s)
        tag = f"beta={beta * 1e9:g}ns,S={s:g}"
        out[f"{tag},SMC"] = (cell, True)
        out[f"{tag},SMC+DMC"] = (cell, False)
    return out


def fig6_variants(apply: Callable[[ScenarioParams], ScenarioParams] = lambda p: p,
                  clusters: dict = FIG6_CLUSTERS) -> dict[str, tuple[ScenarioParams, bool]]:
    """SA/SB x LOS/NLOS presets; SB gets more clusters than SA."""
    out = {}
    for clutter in (Clutter.SA, Clutter.SB):
        for condition in (Condition.LOS, Condition.NLOS):
            params = preset(clutter, condition).with_overrides(n_clusters=clusters[clutter])
            out[f"{clutter.value}-{condition.value}"] = (apply(params), False)
    return out


# --- ACF ------------------------------------------------------------------------

def _acf_task(args, seeds):
    params, instants, lags, clusters, method = args
    scenes = draw_scenes(params, seeds)
    return [{(t, c): acf(scenes, 0, 0, t, lags, method=method, cluster=c) for t in instants for c in clusters}]


def acf_curves(params: ScenarioParams, seed: int, n: int, instants, lags, clusters=(None,),
               method: str = "simulated", workers: int | None = 1) -> dict[tuple, CorrelationEstimate]:
    """Normalized ACF of element pair (0, 0) for every (instant, cluster) combination.

    ``None`` in ``clusters`` means the whole channel.
    """
    ensure_valid(params)
    lags = np.asarray(lags, dtype=float)
    args = (params, tuple(float(t) for t in instants), lags, tuple(clusters), method)
    parts = run_indexed(_acf_task, args, seed, n, workers)
    return {key: merge_estimates([part[key] for part in parts]) for key in parts[0]}
