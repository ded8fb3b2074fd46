"""In-memory document model plus PageXML parser/serializer/validator.

One XML file per page carries regions (polygon + semantic type), their
reading order, text lines, and layered text variants (GT plus per-model
OCR). This module is the single carrier of state between all pipeline
stages: everything a stage produces lands back here.

Supported element subset: PcGts, Page, TextRegion, ImageRegion,
MusicRegion, UnknownRegion, Coords, TextLine, TextEquiv, ReadingOrder
(OrderedGroup + RegionRefIndexed). Anything else is preserved opaquely
and round-trips untouched.
"""

import datetime
import io
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

PAGE_NS = "http://schema.primaresearch.org/PAGE/gts/pagecontent/2019-07-15"

GT_KEY = "GT"

REGION_KINDS = ("text", "image", "music", "other")
TEXT_SUBTYPES = (
    "running-text",
    "heading",
    "page-number",
    "marginalia",
    "signature-mark",
    "catchword",
    "swash-capital",
    "caption",
    "other",
)

_KIND_TO_TAG = {
    "text": "TextRegion",
    "image": "ImageRegion",
    "music": "MusicRegion",
    "other": "UnknownRegion",
}
_TAG_TO_KIND = {v: k for k, v in _KIND_TO_TAG.items()}

_SUBTYPE_TO_XML = {
    "running-text": "paragraph",
    "heading": "heading",
    "page-number": "page-number",
    "marginalia": "marginalia",
    "signature-mark": "signature-mark",
    "catchword": "catch-word",
    "swash-capital": "drop-capital",
    "caption": "caption",
    "other": "other",
}
_XML_TO_SUBTYPE = {v: k for k, v in _SUBTYPE_TO_XML.items()}


class PageError(Exception):
    pass


class ParseError(PageError):
    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class SchemaError(PageError):
    pass


class ValidationError(PageError):
    def __init__(self, diagnostics):
        super().__init__("; ".join(d.message for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass
class Diagnostic:
    code: str
    message: str
    severity: str = "error"  # "error" | "warning"
    subject: str = ""


@dataclass
class Polygon:
    points: list

    def bbox(self):
        xs = [p[0] for p in self.points]
        ys = [p[1] for p in self.points]
        return min(xs), min(ys), max(xs), max(ys)

    @classmethod
    def from_points_attr(cls, attr):
        pts = []
        for token in attr.split():
            x, y = token.split(",")
            pts.append((int(x), int(y)))
        # a stored closing duplicate is the implicit closure, drop it
        if len(pts) > 1 and pts[0] == pts[-1]:
            pts = pts[:-1]
        return cls(pts)

    def to_points_attr(self):
        return " ".join(f"{x},{y}" for x, y in self.points)


@dataclass
class TextVariant:
    text: str
    source: str  # "manual" | "ocr"
    model_id: str = None
    created_at: str = field(default=None, compare=False)

    def __post_init__(self):
        if self.created_at is None:
            self.created_at = datetime.datetime.now(datetime.timezone.utc).isoformat()


@dataclass
class TextLine:
    id: str
    polygon: Polygon
    texts: dict = field(default_factory=dict)
    opaque: list = field(default_factory=list)

    @property
    def gt(self):
        v = self.texts.get(GT_KEY)
        return v.text if v else None

    def set_gt(self, text):
        self.texts[GT_KEY] = TextVariant(text, "manual")

    def set_ocr(self, model_id, text):
        self.texts[model_id] = TextVariant(text, "ocr", model_id=model_id)

    @property
    def best_text(self):
        """GT wins over OCR; among OCR variants the first stored wins."""
        if self.gt is not None:
            return self.gt
        for key, v in self.texts.items():
            if key != GT_KEY:
                return v.text
        return None


@dataclass
class Region:
    id: str
    polygon: Polygon
    kind: str = "text"
    subtype: str = None
    lines: list = field(default_factory=list)
    skew_applied: float = None
    opaque: list = field(default_factory=list)


@dataclass
class Page:
    id: str
    width: int
    height: int
    regions: list = field(default_factory=list)
    reading_order: list = field(default_factory=list)
    image_original: str = None
    image_gray: str = None
    image_binary: str = None
    opaque: list = field(default_factory=list)
    pcgts_opaque: list = field(default_factory=list)
    parse_warnings: list = field(default_factory=list, compare=False)

    def region(self, region_id):
        for r in self.regions:
            if r.id == region_id:
                return r
        raise KeyError(region_id)

    def line(self, line_id):
        for r in self.regions:
            for l in r.lines:
                if l.id == line_id:
                    return r, l
        raise KeyError(line_id)

    def regions_in_reading_order(self):
        by_id = {r.id: r for r in self.regions}
        ordered = [by_id[i] for i in self.reading_order if i in by_id]
        rest = [r for r in self.regions if r.id not in self.reading_order]
        return ordered + rest


@dataclass
class PageRef:
    id: str
    path: str = None


@dataclass
class Book:
    id: str
    pages: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def _localname(tag):
    return tag.rsplit("}", 1)[-1]


def _opaque_xml(elem):
    raw = ET.tostring(elem, encoding="unicode")
    return ET.canonicalize(xml_data=raw)


def parse_page(data, page_id=None):
    """Parse a PageXML byte stream (or string) into a Page."""
    if isinstance(data, bytes):
        text = data.decode("utf-8")
    elif isinstance(data, str):
        text = data
    else:
        text = data.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    try:
        root = ET.fromstring(text)
    except ET.ParseError as e:
        line, col = e.position
        raise ParseError(f"malformed XML: {e}", line, col) from e

    if _localname(root.tag) != "PcGts":
        raise SchemaError(f"root element is {_localname(root.tag)!r}, expected PcGts")
    page_elem = None
    pcgts_opaque = []
    for child in root:
        if _localname(child.tag) == "Page":
            page_elem = child
        else:
            pcgts_opaque.append(_opaque_xml(child))
    if page_elem is None:
        raise SchemaError("missing Page element")

    width = int(page_elem.get("imageWidth", "0"))
    height = int(page_elem.get("imageHeight", "0"))
    filename = page_elem.get("imageFilename", "")
    if page_id is None:
        page_id = filename.rsplit("/", 1)[-1].rsplit(".", 1)[0] or "page"

    page = Page(
        id=page_id,
        width=width,
        height=height,
        image_original=filename or None,
        pcgts_opaque=pcgts_opaque,
    )
    if page_elem.get("custom"):
        for token in page_elem.get("custom").split(";"):
            if token.startswith("gray:"):
                page.image_gray = token[5:]
            elif token.startswith("binary:"):
                page.image_binary = token[7:]

    for child in page_elem:
        name = _localname(child.tag)
        if name == "ReadingOrder":
            for ref in child.iter():
                if _localname(ref.tag) == "RegionRefIndexed":
                    page.reading_order.append(
                        (int(ref.get("index", "0")), ref.get("regionRef"))
                    )
        elif name in _TAG_TO_KIND:
            page.regions.append(_parse_region(child, page))
        else:
            page.opaque.append(_opaque_xml(child))

    page.reading_order = [rid for _, rid in sorted(page.reading_order, key=lambda t: t[0])]

    known = {r.id for r in page.regions}
    dangling = [rid for rid in page.reading_order if rid not in known]
    if dangling:
        raise ValidationError(
            [
                Diagnostic(
                    "reading-order-dangling",
                    f"reading order references nonexistent region id {rid!r}",
                    subject=rid,
                )
                for rid in dangling
            ]
        )

    for diag in validate(page):
        if diag.severity == "warning":
            page.parse_warnings.append(diag)
    return page


def _parse_region(elem, page):
    kind = _TAG_TO_KIND[_localname(elem.tag)]
    region = Region(id=elem.get("id"), polygon=Polygon([]), kind=kind)
    if kind == "text":
        xml_type = elem.get("type")
        if xml_type:
            region.subtype = _XML_TO_SUBTYPE.get(xml_type, "other")
    custom = elem.get("custom", "")
    for token in custom.split(";"):
        if token.startswith("skew:"):
            region.skew_applied = float(token[5:])
    for child in elem:
        name = _localname(child.tag)
        if name == "Coords":
            region.polygon = Polygon.from_points_attr(child.get("points", ""))
        elif name == "TextLine":
            region.lines.append(_parse_line(child))
        else:
            region.opaque.append(_opaque_xml(child))
    return region


def _parse_line(elem):
    line = TextLine(id=elem.get("id"), polygon=Polygon([]))
    equivs = []
    for child in elem:
        name = _localname(child.tag)
        if name == "Coords":
            line.polygon = Polygon.from_points_attr(child.get("points", ""))
        elif name == "TextEquiv":
            index = int(child.get("index", "0"))
            model_id = child.get("comments")
            text = ""
            for sub in child:
                if _localname(sub.tag) == "Unicode":
                    text = sub.text or ""
            equivs.append((index, model_id, text))
        else:
            line.opaque.append(_opaque_xml(child))
    for index, model_id, text in sorted(equivs, key=lambda t: t[0]):
        if index == 0:
            line.texts[GT_KEY] = TextVariant(text, "manual")
        else:
            key = model_id or f"ocr-{index}"
            line.texts[key] = TextVariant(text, "ocr", model_id=key)
    return line


def _esc(value):
    return (
        str(value)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _esc_text(value):
    return str(value).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def serialize_page(page):
    """Serialize a Page to canonical PageXML bytes.

    Output is deterministic: fixed element order, fixed attribute order,
    two-space indentation. Refuses pages with validation errors.
    """
    errors = [d for d in validate(page) if d.severity == "error"]
    if errors:
        raise ValidationError(errors)

    out = io.StringIO()
    w = out.write
    w('<?xml version="1.0" encoding="UTF-8"?>\n')
    w(f'<PcGts xmlns="{PAGE_NS}">\n')
    for blob in page.pcgts_opaque:
        w(f"  {blob}\n")
    custom_parts = []
    if page.image_gray:
        custom_parts.append(f"gray:{page.image_gray}")
    if page.image_binary:
        custom_parts.append(f"binary:{page.image_binary}")
    custom_attr = f' custom="{_esc(";".join(custom_parts))}"' if custom_parts else ""
    filename = page.image_original or f"{page.id}.png"
    w(
        f'  <Page imageFilename="{_esc(filename)}" imageWidth="{page.width}"'
        f' imageHeight="{page.height}"{custom_attr}>\n'
    )
    if page.reading_order:
        w("    <ReadingOrder>\n")
        w('      <OrderedGroup id="ro">\n')
        for i, rid in enumerate(page.reading_order):
            w(f'        <RegionRefIndexed index="{i}" regionRef="{_esc(rid)}"/>\n')
        w("      </OrderedGroup>\n")
        w("    </ReadingOrder>\n")
    for blob in page.opaque:
        w(f"    {blob}\n")
    for region in page.regions:
        _write_region(w, region)
    w("  </Page>\n")
    w("</PcGts>\n")
    return out.getvalue().encode("utf-8")


def _write_region(w, region):
    tag = _KIND_TO_TAG[region.kind]
    attrs = f' id="{_esc(region.id)}"'
    if region.kind == "text" and region.subtype:
        attrs += f' type="{_esc(_SUBTYPE_TO_XML[region.subtype])}"'
    if region.skew_applied is not None:
        attrs += f' custom="skew:{region.skew_applied}"'
    w(f"    <{tag}{attrs}>\n")
    w(f'      <Coords points="{region.polygon.to_points_attr()}"/>\n')
    for blob in region.opaque:
        w(f"      {blob}\n")
    for line in region.lines:
        _write_line(w, line)
    w(f"    </{tag}>\n")


def _write_line(w, line):
    w(f'      <TextLine id="{_esc(line.id)}">\n')
    w(f'        <Coords points="{line.polygon.to_points_attr()}"/>\n')
    for blob in line.opaque:
        w(f"        {blob}\n")
    index = 1
    if GT_KEY in line.texts:
        w('        <TextEquiv index="0">')
        w(f"<Unicode>{_esc_text(line.texts[GT_KEY].text)}</Unicode>")
        w("</TextEquiv>\n")
    for key, variant in line.texts.items():
        if key == GT_KEY:
            continue
        w(f'        <TextEquiv index="{index}" comments="{_esc(key)}">')
        w(f"<Unicode>{_esc_text(variant.text)}</Unicode>")
        w("</TextEquiv>\n")
        index += 1
    w("      </TextLine>\n")


def validate(page):
    """All invariant violations of the page, as diagnostics."""
    diags = []
    if page.width <= 0 or page.height <= 0:
        diags.append(
            Diagnostic("page-dimensions", f"page {page.id}: width/height must be > 0")
        )
    seen = set()
    for rid in page.reading_order:
        if rid in seen:
            diags.append(
                Diagnostic(
                    "reading-order-duplicate",
                    f"duplicate reading order entry {rid!r}",
                    subject=rid,
                )
            )
        seen.add(rid)
    known = {r.id for r in page.regions}
    for rid in page.reading_order:
        if rid not in known:
            diags.append(
                Diagnostic(
                    "reading-order-dangling",
                    f"reading order references nonexistent region id {rid!r}",
                    subject=rid,
                )
            )

    region_ids = set()
    for region in page.regions:
        if region.id in region_ids:
            diags.append(
                Diagnostic(
                    "region-id-duplicate",
                    f"duplicate region id {region.id!r}",
                    subject=region.id,
                )
            )
        region_ids.add(region.id)
        diags.extend(_validate_polygon(region.polygon, page, f"region {region.id}"))
        if region.kind not in REGION_KINDS:
            diags.append(
                Diagnostic(
                    "region-kind", f"unknown region kind {region.kind!r}", subject=region.id
                )
            )
        if region.kind != "text" and region.lines:
            diags.append(
                Diagnostic(
                    "non-text-lines",
                    f"non-text region {region.id} has {len(region.lines)} lines",
                    subject=region.id,
                )
            )
        if region.subtype is not None and region.kind != "text":
            diags.append(
                Diagnostic(
                    "subtype-on-non-text",
                    f"non-text region {region.id} carries a subtype",
                    subject=region.id,
                )
            )
        if region.polygon.points:
            rx0, ry0, rx1, ry1 = region.polygon.bbox()
        else:
            rx0 = ry0 = rx1 = ry1 = None
        for line in region.lines:
            diags.extend(
                _validate_polygon(line.polygon, page, f"line {line.id}")
            )
            if rx0 is not None and line.polygon.points:
                lx0, ly0, lx1, ly1 = line.polygon.bbox()
                if lx0 < rx0 or ly0 < ry0 or lx1 > rx1 or ly1 > ry1:
                    diags.append(
                        Diagnostic(
                            "line-outside-region",
                            f"line {line.id} polygon exceeds region {region.id} bbox",
                            severity="warning",
                            subject=line.id,
                        )
                    )
            for key, variant in line.texts.items():
                manual = variant.source == "manual"
                if manual != (key == GT_KEY):
                    diags.append(
                        Diagnostic(
                            "variant-source-mismatch",
                            f"line {line.id} variant {key!r}: source "
                            f"{variant.source!r} conflicts with key",
                            subject=line.id,
                        )
                    )
    return diags


def _validate_polygon(polygon, page, subject):
    diags = []
    pts = polygon.points
    if len(pts) < 3:
        diags.append(
            Diagnostic(
                "degenerate-polygon",
                f"{subject}: polygon has {len(pts)} points (need >= 3)",
                subject=subject,
            )
        )
        return diags
    for a, b in zip(pts, pts[1:]):
        if a == b:
            diags.append(
                Diagnostic(
                    "repeated-point",
                    f"{subject}: consecutive identical points {a}",
                    subject=subject,
                )
            )
            break
    for x, y in pts:
        if not (0 <= x <= page.width and 0 <= y <= page.height):
            diags.append(
                Diagnostic(
                    "point-out-of-bounds",
                    f"{subject}: point ({x},{y}) outside page bounds",
                    severity="warning",
                    subject=subject,
                )
            )
            break
    return diags
