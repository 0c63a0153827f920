"""
二維凸多邊形模組

以半平面 n·u <= c 表示，建構時即計算逆時針頂點列表。
速度集合 U_i 與加速度集合 U_i^acc 皆以此表示。
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from loguru import logger

from utils.errors import GeometryError

# 可行性容差（正規化後的半平面距離）
FEAS_TOL = 1e-9
# 判斷為 active constraint 的容差
ACTIVE_TOL = 1e-7
# 平行判斷門檻
PARALLEL_TOL = 1e-12


def _normalize(normals, offsets) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    正規化半平面並剔除零法向量

    Returns:
        (單位法向量, 對應 offset, 原始索引)

    Raises:
        GeometryError: 零法向量搭配負 offset（0 <= c 不成立）
    """
    A = np.asarray(normals, dtype=float).reshape(-1, 2)
    c = np.asarray(offsets, dtype=float).reshape(-1)
    if A.shape[0] != c.shape[0]:
        raise GeometryError(f"半平面數量不一致: {A.shape[0]} 法向量, {c.shape[0]} offset")

    norms = np.linalg.norm(A, axis=1)
    zero = norms < PARALLEL_TOL
    if np.any(zero & (c < -FEAS_TOL)):
        raise GeometryError("零法向量的半平面不可行")

    keep = np.flatnonzero(~zero)
    return A[keep] / norms[keep, None], c[keep] / norms[keep], keep


def _drop_parallel_duplicates(A: np.ndarray, c: np.ndarray) -> np.ndarray:
    """同方向平行的半平面只保留較緊的一條，回傳保留索引"""
    m = A.shape[0]
    if m < 2:
        return np.arange(m)

    cross = np.outer(A[:, 0], A[:, 1]) - np.outer(A[:, 1], A[:, 0])
    dot = A @ A.T
    same_dir = (np.abs(cross) <= PARALLEL_TOL) & (dot > 0)
    np.fill_diagonal(same_dir, False)

    idx = np.arange(m)
    tighter = (c[None, :] < c[:, None]) | ((c[None, :] == c[:, None]) & (idx[None, :] < idx[:, None]))
    dropped = np.any(same_dir & tighter, axis=1)
    return np.flatnonzero(~dropped)


def _pair_intersections(A: np.ndarray, c: np.ndarray) -> np.ndarray:
    """所有非平行半平面邊界線兩兩交點"""
    m = A.shape[0]
    if m < 2:
        return np.empty((0, 2))

    i, j = np.triu_indices(m, k=1)
    det = A[i, 0] * A[j, 1] - A[i, 1] * A[j, 0]
    ok = np.abs(det) > PARALLEL_TOL
    i, j, det = i[ok], j[ok], det[ok]

    x = (c[i] * A[j, 1] - c[j] * A[i, 1]) / det
    y = (A[i, 0] * c[j] - A[j, 0] * c[i]) / det
    return np.column_stack([x, y])


def nearest_point(
    normals,
    offsets,
    target,
    tol: float = FEAS_TOL
) -> tuple[Optional[np.ndarray], tuple[int, ...]]:
    """
    求半平面交集中距離 target 最近的點（精確 active-set 列舉）

    候選點依序為：target 本身、target 在各邊界線上的投影、
    邊界線兩兩交點。取可行者中目標值最小的，同值取索引最小者。

    Args:
        normals: (m, 2) 法向量
        offsets: (m,) offset，約束為 n·u <= c
        target: 目標點
        tol: 可行性容差

    Returns:
        (最近點, active 約束的原始索引)；交集為空時回傳 (None, ())
    """
    t = np.asarray(target, dtype=float).reshape(2)
    try:
        A, c, orig = _normalize(normals, offsets)
    except GeometryError:
        return None, ()

    keep = _drop_parallel_duplicates(A, c)
    A, c, orig = A[keep], c[keep], orig[keep]

    if A.shape[0] == 0:
        return t.copy(), ()

    residual = A @ t - c
    projections = t[None, :] - residual[:, None] * A
    candidates = np.vstack([t[None, :], projections, _pair_intersections(A, c)])

    feasible = np.all(candidates @ A.T - c[None, :] <= tol, axis=1)
    if not np.any(feasible):
        return None, ()

    objective = np.sum((candidates - t[None, :]) ** 2, axis=1)
    objective[~feasible] = np.inf
    best = candidates[int(np.argmin(objective))]

    slack = np.abs(A @ best - c)
    active = tuple(int(k) for k in orig[slack <= ACTIVE_TOL])
    return best, active


def enumerate_vertices(normals, offsets) -> np.ndarray:
    """
    由半平面計算逆時針排序的頂點

    Raises:
        GeometryError: 區域無界或為空
    """
    A, c, _ = _normalize(normals, offsets)
    if A.shape[0] < 3:
        raise GeometryError(f"半平面數不足以形成有界區域: {A.shape[0]}")

    # 有界 <=> 法向量在各方向都有正分量 <=> 法向量角度最大間隔 < pi
    angles = np.sort(np.mod(np.arctan2(A[:, 1], A[:, 0]), 2 * np.pi))
    gaps = np.diff(np.concatenate([angles, [angles[0] + 2 * np.pi]]))
    if np.max(gaps) >= np.pi - PARALLEL_TOL:
        raise GeometryError("半平面交集無界")

    keep = _drop_parallel_duplicates(A, c)
    A, c = A[keep], c[keep]

    points = _pair_intersections(A, c)
    scale = max(1.0, float(np.max(np.abs(c))))
    if points.shape[0] > 0:
        points = points[np.all(points @ A.T - c[None, :] <= FEAS_TOL * scale, axis=1)]
    if points.shape[0] == 0:
        raise GeometryError("半平面交集為空")

    # 去除重複頂點
    dist = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    close = np.tril(dist <= FEAS_TOL * scale, k=-1)
    points = points[~np.any(close, axis=1)]

    if points.shape[0] <= 2:
        return points

    centroid = points.mean(axis=0)
    theta = np.mod(np.arctan2(points[:, 1] - centroid[1], points[:, 0] - centroid[0]), 2 * np.pi)
    theta[theta > 2 * np.pi - 1e-12] = 0.0
    return points[np.argsort(theta, kind="stable")]


@dataclass(frozen=True, eq=False)
class Polytope2:
    """
    二維凸多邊形（不可變）

    Attributes:
        normals: (m, 2) 半平面法向量
        offsets: (m,) 半平面 offset
        vertices: (k, 2) 逆時針頂點
    """
    normals: np.ndarray
    offsets: np.ndarray
    vertices: np.ndarray

    @classmethod
    def from_halfspaces(cls, normals, offsets) -> "Polytope2":
        """由半平面建構，同時計算頂點"""
        A = np.array(normals, dtype=float).reshape(-1, 2)
        c = np.array(offsets, dtype=float).reshape(-1)
        vertices = enumerate_vertices(A, c)
        for arr in (A, c, vertices):
            arr.flags.writeable = False
        return cls(A, c, vertices)

    @classmethod
    def box(cls, half_x: float, half_y: float) -> "Polytope2":
        """以原點為中心的矩形 |u1| <= half_x, |u2| <= half_y"""
        normals = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]
        offsets = [half_x, half_x, half_y, half_y]
        return cls.from_halfspaces(normals, offsets)

    @classmethod
    def from_vertices(cls, vertices) -> "Polytope2":
        """由逆時針頂點重建半平面"""
        V = np.asarray(vertices, dtype=float).reshape(-1, 2)
        if V.shape[0] < 3:
            raise GeometryError("至少需要 3 個頂點")
        edges = np.roll(V, -1, axis=0) - V
        normals = np.column_stack([edges[:, 1], -edges[:, 0]])
        offsets = np.einsum("ij,ij->i", normals, V)
        return cls.from_halfspaces(normals, offsets)

    @property
    def halfspaces(self) -> list[tuple[np.ndarray, float]]:
        """(n, c) 列表"""
        return [(n.copy(), float(c)) for n, c in zip(self.normals, self.offsets)]

    def contains(self, point, tol: float = FEAS_TOL) -> bool:
        """點是否在多邊形內（含容差）"""
        p = np.asarray(point, dtype=float).reshape(2)
        norms = np.linalg.norm(self.normals, axis=1)
        return bool(np.all(self.normals @ p - self.offsets <= tol * np.maximum(norms, 1.0)))

    def project(self, point) -> np.ndarray:
        """歐氏距離最近點；點已在內部時原樣回傳"""
        p = np.asarray(point, dtype=float).reshape(2)
        if self.contains(p):
            return p.copy()
        nearest, _ = nearest_point(self.normals, self.offsets, p)
        if nearest is None:
            # 建構時已確認非空，只有數值退化時才會到此
            logger.warning("投影失敗，改用最近頂點")
            idx = int(np.argmin(np.linalg.norm(self.vertices - p, axis=1)))
            return self.vertices[idx].copy()
        return nearest

    def reduced(self) -> "Polytope2":
        """去除冗餘半平面（只保留至少通過兩個頂點的邊）"""
        if self.vertices.shape[0] < 3:
            return self
        norms = np.linalg.norm(self.normals, axis=1)
        slack = np.abs(self.vertices @ self.normals.T - self.offsets[None, :]) / norms[None, :]
        tight = np.sum(slack <= 1e-9 * max(1.0, float(np.max(np.abs(self.offsets)))), axis=0) >= 2
        return Polytope2.from_halfspaces(self.normals[tight], self.offsets[tight])

    def __repr__(self):
        return f"<Polytope2({self.normals.shape[0]} halfspaces, {self.vertices.shape[0]} vertices)>"
