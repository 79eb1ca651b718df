"""
命令行界面
"""
