"""
可重現亂數產生器

每個 trial 使用獨立串流：trial k 的種子為 seed XOR k，
產生器固定為 numpy 的 PCG64，跨平台結果一致。
"""
import numpy as np

SEED_MASK = (1 << 64) - 1


def trial_seed(seed: int, trial: int) -> int:
    """計算第 trial 次試驗的種子"""
    return (int(seed) ^ int(trial)) & SEED_MASK


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """取得第 trial 次試驗的亂數產生器"""
    return np.random.Generator(np.random.PCG64(trial_seed(seed, trial)))
