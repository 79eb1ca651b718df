"""基于标记外骨骼的机器人状态估计工具包"""

__version__ = "0.1.0"
