"""
opfrelax: convex relaxations of AC optimal power flow
"""

from .cli import main

__all__ = ["main"]
