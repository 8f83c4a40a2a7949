"""Loop-calculus analysis of regular LDPC codes on the BEC and BSC."""
from .channel import BEC, BSC, ChannelRealization, ChannelSpec
from .errors import LoopCalcError
from .tanner import TannerGraph, null_space, sample_graph

__all__ = ["BEC", "BSC", "ChannelRealization", "ChannelSpec", "LoopCalcError",
           "TannerGraph", "null_space", "sample_graph"]
__version__ = "0.1.0"
