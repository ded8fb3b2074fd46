"""Minimal page-image extraction from scanned (image-only) PDFs.

No PDF library is available, so this walks the raw file for image
XObject streams and decodes the two encodings scanned books actually
use: DCTDecode (embedded JPEG) and FlateDecode raw bitmaps. Vector
content is out of scope; a PDF without embedded page images raises.
"""

import io
import re
import zlib

from PIL import Image

_STREAM_RE = re.compile(rb"<<(.*?)>>\s*stream\r?\n", re.DOTALL)


class PdfError(Exception):
    pass


def _dict_int(raw, key):
    m = re.search(rb"/" + key + rb"\s+(\d+)", raw)
    return int(m.group(1)) if m else None


def extract_page_images(path):
    """All embedded page images, in file order, as PIL images."""
    data = path.read_bytes() if hasattr(path, "read_bytes") else open(path, "rb").read()
    images = []
    for m in _STREAM_RE.finditer(data):
        header = m.group(1)
        if b"/Subtype" not in header or b"/Image" not in header:
            continue
        start = m.end()
        end = data.find(b"endstream", start)
        if end < 0:
            continue
        stream = data[start:end].rstrip(b"\r\n")
        if b"/DCTDecode" in header:
            try:
                images.append(Image.open(io.BytesIO(stream)).copy())
            except OSError as e:
                raise PdfError(f"unreadable JPEG stream: {e}") from e
        elif b"/FlateDecode" in header:
            width = _dict_int(header, b"Width")
            height = _dict_int(header, b"Height")
            if not width or not height:
                continue
            raw = zlib.decompress(stream)
            if b"/DeviceRGB" in header and len(raw) >= width * height * 3:
                images.append(Image.frombytes("RGB", (width, height), raw[: width * height * 3]))
            elif len(raw) >= width * height:
                images.append(Image.frombytes("L", (width, height), raw[: width * height]))
    if not images:
        raise PdfError("no embedded page images found (vector PDFs unsupported)")
    return images
