"""
Командная строка pggtrack
"""
from .main import cli, main

__all__ = ['cli', 'main']
