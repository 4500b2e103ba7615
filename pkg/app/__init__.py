"""
FairQueue - 公平非阻塞队列实验平台
主应用模块
"""

__version__ = "1.0.0"
__author__ = "FairQueue Team"
