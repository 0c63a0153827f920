"""
pytest 共用設定

- 將專案根目錄加入 sys.path（與 main.py 相同做法）
- --runslow 才執行標記為 slow 的重現實驗
"""
import sys
from pathlib import Path

import numpy as np
import pytest

PROJECT_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from calculators.kinematics import KinematicClass, KinematicSpec  # noqa: E402
from calculators.opspace import AgentState  # noqa: E402
from data.scenario import AgentSetup, Scenario  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="執行長時間的重現實驗")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="需要 --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def specs() -> dict[str, KinematicSpec]:
    """各類別的預設參數"""
    return {kc.value: KinematicSpec.default(kc) for kc in KinematicClass}


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(20240531))


def random_state(rng: np.random.Generator, spec: KinematicSpec, extent: float = 5.0) -> AgentState:
    """在速度集合內隨機取樣的狀態"""
    from calculators.kinematics import velocity_set

    U = velocity_set(spec)
    V = U.vertices
    weights = rng.dirichlet(np.ones(V.shape[0]))
    nu = weights @ V
    return AgentState(
        phi=float(rng.uniform(-np.pi, np.pi)),
        x=float(rng.uniform(-extent, extent)),
        y=float(rng.uniform(-extent, extent)),
        v=float(nu[0]),
        omega=float(nu[1]),
    )


def two_agent_scenario(
    spec_a: KinematicSpec,
    spec_b: KinematicSpec,
    crossing: bool = False,
    distance: float = 4.0,
) -> Scenario:
    """
    兩機器人情境：對向（head-on）或十字交叉

    參考點起點相距 distance，目標為對方起點（對向）或交叉穿越
    """
    half = distance / 2
    if crossing:
        starts = [(0.0, -half, 0.0), (np.pi / 2, 0.0, -half)]
        goals = [(half, 0.0), (0.0, half)]
    else:
        starts = [(0.0, -half, 0.0), (np.pi, half, 0.0)]
        goals = [(half, 0.0), (-half, 0.0)]

    agents = []
    for spec, (phi, x, y), goal in zip((spec_a, spec_b), starts, goals):
        # 起點以參考點給定，反推本體中心
        x_r = spec.look_ahead
        agents.append(AgentSetup(spec, (phi, x - x_r * np.cos(phi), y - x_r * np.sin(phi)), goal))
    return Scenario(agents=tuple(agents))
