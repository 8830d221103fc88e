"""
.. moduleauthor:: PySatNet developers
"""

name = "pysatnet"
__version__ = "1.0"
