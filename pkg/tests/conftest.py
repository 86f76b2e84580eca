import numpy as np
import pytest

from iiotgbsm.channel import Scene
from iiotgbsm.clusters import ClusterRealization, Environment, PathKind, Scatterer
from iiotgbsm.config import Layout, preset
from iiotgbsm.geometry import ArrayConfig, Trajectory

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def sa_nlos():
    return preset("SA", "NLOS")


@pytest.fixture
def sa_los():
    return preset("SA", "LOS")


def scatterer(kind="SMC", rx=(5.0, 0.0, 0.0), tx=(5.0, 0.0, 0.0), rel=0.0, add=0.0, phases=(0.0,) * 4, xpr=0.0):
    return Scatterer(PathKind(kind), 0.0, 0.0, 0.0, 0.0, rel, add, tuple(phases), xpr,
                     np.array(rx, dtype=float), np.array(tx, dtype=float))


def cluster(smcs, dmcs=(), virtual=0.0, shadow=0.0, first=(5.0, 0.0, 0.0), last=(5.0, 0.0, 0.0), v=(0.0, 0.0, 0.0),
            vis_tx=(0,), vis_rx=(0,), cid=0):
    return ClusterRealization(cid, Trajectory(first, v), Trajectory(last, v), virtual, shadow, list(smcs), list(dmcs),
                              frozenset(vis_tx), frozenset(vis_rx))


def hand_scene(params, clusters, tx=(0.0, 0.0, 0.0), rx=(1.0, 0.0, 0.0), v_rx=(0.0, 0.0, 0.0), n_tx=1, n_rx=1,
               spacing=0.0, sigma_tau=40e-9, los_phase=0.0):
    """Scene around a hand-built environment (bypasses the random draws)."""
    env = Environment(list(clusters), sigma_tau, los_phase, np.array(tx, dtype=float), np.array(rx, dtype=float))
    tx_arr = ArrayConfig(Trajectory(tx, (0.0, 0.0, 0.0)), n_tx, spacing, np.pi / 2)
    rx_arr = ArrayConfig(Trajectory(rx, v_rx), n_rx, spacing, np.pi / 2)
    return Scene(params, env, tx_arr, rx_arr)


def nlos_params(**changes):
    base = preset("SA", "NLOS")
    layout = changes.pop("layout", None)
    if layout is not None:
        changes["layout"] = Layout(**layout)
    return base.with_overrides(**changes)


def draw_ensemble(params, seed, n):
    return [Scene.draw(params, np.random.default_rng(s)) for s in np.random.SeedSequence(seed).spawn(n)]
