from .catalog import (
    FontCatalog,
    FontEntry,
    GlyphBoxRatio,
    NotCoveredError,
    ZeroAdvanceError,
    index_fonts,
    pick_family,
    tighten,
)

__all__ = [
    "FontCatalog",
    "FontEntry",
    "GlyphBoxRatio",
    "NotCoveredError",
    "ZeroAdvanceError",
    "index_fonts",
    "pick_family",
    "tighten",
]
