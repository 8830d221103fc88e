"""
.. moduleauthor:: PySatNet developers
"""
