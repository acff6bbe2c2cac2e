"""One-sided matching with paired preference/evaluation rankings."""

from .core import (
    ChildId,
    HomeId,
    Market,
    Matching,
    Order,
    Problem,
    StrictRanking,
    WeakRanking,
)
from .mechanisms import DictatorOrder, PointingOrder, TieBreakPolicy, asdi, rsa, sd, sdi, uttc

__all__ = [
    "ChildId",
    "HomeId",
    "Market",
    "Matching",
    "Order",
    "Problem",
    "StrictRanking",
    "WeakRanking",
    "DictatorOrder",
    "PointingOrder",
    "TieBreakPolicy",
    "asdi",
    "rsa",
    "sd",
    "sdi",
    "uttc",
]
