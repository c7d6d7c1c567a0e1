"""Raster output for the stub browser: characters as ink bands, replaced
elements as bordered placeholder boxes. Deterministic for identical layout.
"""

from __future__ import annotations

import io

from PIL import Image, ImageDraw

from .dom import LATEX_CLASS
from .instrument import StubPage

TEXT_COLOR = (52, 56, 64)
ATOM_FILL = (226, 228, 232)
ATOM_BORDER = (142, 146, 152)
LATEX_FILL = (212, 222, 244)
LATEX_BORDER = (92, 112, 180)
BACKGROUND = (255, 255, 255)


def paint(page: StubPage, width: int, height: int, scale: float, image_format: str, quality: int) -> bytes:
    img_w = max(1, round(width * scale))
    img_h = max(1, round(height * scale))
    image = Image.new("RGB", (img_w, img_h), BACKGROUND)
    draw = ImageDraw.Draw(image)

    for box in page.layout.atom_boxes:
        latex = LATEX_CLASS in box.element.classes()
        x0, y0 = box.x * scale, box.y * scale
        x1, y1 = (box.x + box.w) * scale, (box.y + box.h) * scale
        draw.rectangle(
            [x0, y0, x1 - 1, y1 - 1],
            fill=LATEX_FILL if latex else ATOM_FILL,
            outline=LATEX_BORDER if latex else ATOM_BORDER,
            width=max(1, round(scale)),
        )

    for box in page.layout.char_boxes:
        if box.ch.isspace():
            continue
        # ink band: full advance width, the middle 60% of the line box
        x0 = box.x * scale
        x1 = (box.x + box.w) * scale - max(1.0, 0.1 * box.w * scale)
        y0 = (box.y + 0.2 * box.h) * scale
        y1 = (box.y + 0.8 * box.h) * scale
        if x1 > x0 and y1 > y0:
            draw.rectangle([x0, y0, x1, y1], fill=TEXT_COLOR)

    buf = io.BytesIO()
    if image_format == "jpeg":
        image.save(buf, format="JPEG", quality=quality)
    else:
        image.save(buf, format="PNG")
    return buf.getvalue()
