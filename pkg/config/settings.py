"""
CA-HCBF 異質多機器人安全控制模擬系統設定檔
所有可調參數集中於此，可透過 .env 覆寫部分設定
"""
import math
import os
from pathlib import Path

from dotenv import load_dotenv

# 專案根目錄
BASE_DIR = Path(__file__).resolve().parent.parent

# 載入 .env 檔案
load_dotenv(BASE_DIR / ".env")


def _env_int(name: str, default: int) -> int:
    """讀取正整數環境變數，格式錯誤時回到預設值"""
    raw = os.getenv(name, str(default))
    try:
        value = int(raw)
        if value <= 0:
            return default
        return value
    except ValueError:
        return default


# ==================== 機器人參數 ====================
# 各運動學類別的預設參數（look-ahead、速度、加速度、軸距、外形）
# CL / FO 車體 0.3 x 0.6 m，以半對角線作為外接圓半徑
_BODY_HALF_DIAGONAL = math.hypot(0.15, 0.30)

AGENT_PARAMS = {
    "DI": {
        "x_r": 0.0,
        "v_max": 1.0,
        "omega_max": 0.0,
        "a_max": 2.0,
        "omega_dot_max": 2.0,   # DI 第二分量為 y 方向加速度，與 a_max 相同
        "wheelbase": 0.0,
        "psi_max": 0.0,
        "r_phys": 0.3,
        "steer_floor": 0.0,
        "wheel_accel_max": 0.0,
    },
    "UNI": {
        "x_r": 0.1,
        "v_max": 1.0,
        "omega_max": math.pi,
        "a_max": 2.0,
        "omega_dot_max": 8.0,
        "wheelbase": 0.0,
        "psi_max": 0.0,
        "r_phys": 0.3,
        "steer_floor": 0.0,
        "wheel_accel_max": 0.0,
    },
    "DD": {
        "x_r": 0.1,
        "v_max": 1.0,
        "omega_max": 0.0,
        "a_max": 2.0,           # 由輪加速度菱形決定，此值僅作為外框
        "omega_dot_max": 8.0,   # 2 * a_w / wheelbase
        "wheelbase": 0.5,
        "psi_max": 0.0,
        "r_phys": 0.3,
        "steer_floor": 0.0,
        "wheel_accel_max": 2.0,
    },
    "CL": {
        "x_r": 0.2,
        "v_max": 1.0,
        "omega_max": 0.0,
        "a_max": 2.0,
        "omega_dot_max": 10.0,
        "wheelbase": 0.5,
        "psi_max": math.pi / 4,
        "r_phys": _BODY_HALF_DIAGONAL,
        "steer_floor": 0.1,
        "wheel_accel_max": 0.0,
    },
    "FO": {
        "x_r": 0.2,
        "v_max": 1.0,
        "omega_max": 0.0,
        "a_max": 2.0,
        "omega_dot_max": 10.0,
        "wheelbase": 0.5,
        "psi_max": math.pi / 4,
        "r_phys": _BODY_HALF_DIAGONAL,
        "steer_floor": 0.1,
        "wheel_accel_max": 0.0,
    },
}

# 混合隊伍的類別順序
CLASS_ORDER = ["DI", "UNI", "DD", "CL", "FO"]

# ==================== 模擬參數 ====================
SIM_PARAMS = {
    "dt": 0.05,                 # 秒
    "max_steps": 1000,
    "goal_tol": 0.3,            # 公尺
    "neighbor_radius": math.inf,
}

# 隨機起終點情境參數（11 x 11 m 區域）
SCENARIO_PARAMS = {
    "region_half_width": 5.5,
    "min_start_goal": 4.0,
    "min_separation": 1.5,
    "max_rejection": 100_000,
    "antipodal_radius": 4.0,
}

# ==================== CBF 與分配參數 ====================
CBF_PARAMS = {
    "lambda1": 2.0,
    "lambda2": 2.0,
}

ALLOCATION_PARAMS = {
    "epsilon": 1e-6,
    "strategy": "full",
}

# ==================== 名目控制器 (APF) ====================
NOMINAL_PARAMS = {
    "w": 0.9,
    "k_att": 1.0,
    "k_rep": 0.2,
    "d_cut": 3.0,
    "k_p": 2.0,
    "k_v": 2.0,
    "k_phi": 4.0,
}

# ==================== 批次實驗設定 ====================
SUITE_PRESETS = {
    # 主比較表：方法 x 隊伍規模
    "table": {
        "sizes": [10, 20, 30],
        "variants": [
            {"method": "cahcbf", "alloc": "full", "w": 0.9},
            {"method": "apf", "alloc": "full", "w": 0.9},
            {"method": "apf", "alloc": "full", "w": 0.5},
            {"method": "apf", "alloc": "full", "w": 0.1},
            {"method": "hocbf", "alloc": "equal", "w": 0.9},
        ],
    },
    # 分配策略消融
    "ablation": {
        "sizes": [10, 20, 30],
        "variants": [
            {"method": "cahcbf", "alloc": "equal", "w": 0.9},
            {"method": "cahcbf", "alloc": "cap", "w": 0.9},
            {"method": "cahcbf", "alloc": "full", "w": 0.9},
        ],
    },
}

DEFAULT_TRIALS = 50

# 批次實驗的平行 process 數
WORKERS = _env_int("CAHCBF_WORKERS", 1)

# ==================== 輸出設定 ====================
OUTPUT_CONFIG = {
    "out_dir": os.getenv("CAHCBF_OUTPUT_DIR", str(BASE_DIR / "results")),
    "db_path": os.getenv("CAHCBF_DB_PATH", str(BASE_DIR / "data" / "cahcbf_results.db")),
    "float_format": "%.9g",
    "schema_version": 1,
}

# ==================== 日誌設定 ====================
LOG_CONFIG = {
    "level": os.getenv("LOG_LEVEL", "INFO"),
    "format": "{time:YYYY-MM-DD HH:mm:ss} | {level:<8} | {name}:{line} - {message}",
    "file": str(BASE_DIR / "logs" / "cahcbf.log"),
}
