"""
離線檢查匯出的軌跡

用途：由 trajectory.csv 與情境 JSON 重新檢查
- 每個影格的速度都在速度集合內
- 參考點距離 >= R_ij 時，本體中心距離 >= r_i + r_j
"""
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from calculators.barrier import pair_radius
from calculators.kinematics import FORWARD, REVERSE, KinematicClass, velocity_set
from calculators.opspace import AgentState, reference_point
from data.scenario import load_scenario

VELOCITY_TOL = 1e-6


def verify_trajectory(csv_path: str | Path, scenario_path: str | Path) -> dict:
    """
    檢查軌跡檔

    Args:
        csv_path: trajectory.csv
        scenario_path: 對應的情境 JSON（隨機情境可用 main.py scenario 匯出）

    Returns:
        {"frames", "velocity_violations", "physical_safety_exceptions", "ok"}
    """
    df = pd.read_csv(csv_path)
    specs = load_scenario(scenario_path).specs
    logger.info(f"讀取 {len(df)} 列軌跡，{len(specs)} 個機器人")

    velocity_violations = 0
    for row in df.itertuples(index=False):
        spec = specs[int(row.agent)]
        gear = FORWARD
        if spec.kinematic_class is KinematicClass.CL and row.v < 0:
            gear = REVERSE
        if not velocity_set(spec, gear).contains((row.v, row.omega), tol=VELOCITY_TOL):
            velocity_violations += 1
            logger.warning(f"trial {row.trial} step {row.step} agent {row.agent} 速度超出可行集合")

    n = len(specs)
    radii = np.array([[pair_radius(a, b) for b in specs] for a in specs])
    phys = np.array([s.r_phys for s in specs])
    iu, ju = np.triu_indices(n, k=1)

    exceptions = 0
    frames = 0
    for (trial, step), frame in df.groupby(["trial", "step"], sort=True):
        frame = frame.sort_values("agent")
        if len(frame) != n:
            continue
        frames += 1
        centers = frame[["x", "y"]].to_numpy()
        ref = np.array([
            reference_point(AgentState(phi=r.phi, x=r.x, y=r.y), specs[int(r.agent)])
            for r in frame.itertuples(index=False)
        ])
        ref_dist = np.linalg.norm(ref[iu] - ref[ju], axis=1)
        center_dist = np.linalg.norm(centers[iu] - centers[ju], axis=1)
        bad = (ref_dist >= radii[iu, ju]) & (center_dist < phys[iu] + phys[ju])
        if np.any(bad):
            exceptions += int(np.count_nonzero(bad))
            logger.warning(f"trial {trial} step {step}: {int(np.count_nonzero(bad))} 組本體相交")

    ok = velocity_violations == 0 and exceptions == 0
    logger.info(
        f"檢查完成: {frames} 個影格, 速度違規 {velocity_violations}, "
        f"本體相交例外 {exceptions} -> {'通過' if ok else '未通過'}"
    )
    return {
        "frames": frames,
        "velocity_violations": velocity_violations,
        "physical_safety_exceptions": exceptions,
        "ok": ok,
    }


if __name__ == "__main__":
    if len(sys.argv) < 3:
        print("用法: python scripts/verify_trajectory.py <trajectory.csv> <scenario.json>")
        sys.exit(1)

    result = verify_trajectory(sys.argv[1], sys.argv[2])
    sys.exit(0 if result["ok"] else 1)
