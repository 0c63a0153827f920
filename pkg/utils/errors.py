"""
例外類別
"""


class CahcbfError(Exception):
    """所有模擬系統例外的基底類別"""


class ParameterError(CahcbfError):
    """參數不合法（KinematicSpec、增益、設定值）"""


class StateError(CahcbfError):
    """機器人狀態超出可行集合"""


class GeometryError(CahcbfError):
    """多邊形為空、無界或頂點列表為空"""


class DegeneratePairError(CahcbfError):
    """兩機器人參考點重合，約束方向無定義"""


class AllocationContractError(CahcbfError):
    """責任分配函式的前置條件不成立"""


class ConfigError(CahcbfError):
    """命令列或模擬設定錯誤（結束碼 2）"""


class ScenarioError(CahcbfError):
    """情境生成或讀取失敗（結束碼 3）"""
