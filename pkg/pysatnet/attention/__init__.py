"""
.. moduleauthor:: PySatNet developers
"""

from pysatnet.attention.balanced import BalancedAttnBlock
from pysatnet.attention.cbam import CBAMBlock, ChannelGate, SpatialGate
from pysatnet.attention.coordinate import CoordAttnBlock
from pysatnet.attention.se import SEBlock

__all__ = ['SEBlock', 'CoordAttnBlock', 'CBAMBlock', 'ChannelGate', 'SpatialGate', 'BalancedAttnBlock']
