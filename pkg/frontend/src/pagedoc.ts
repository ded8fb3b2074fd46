import { DOMParser, XMLSerializer } from "@xmldom/xmldom";
import type { Document, Element } from "@xmldom/xmldom";

import type { Point } from "./types.js";

export const PAGE_NS = "http://schema.primaresearch.org/PAGE/gts/pagecontent/2019-07-15";

const REGION_TAGS = ["TextRegion", "ImageRegion", "GraphicRegion", "SeparatorRegion"];

export interface LineView {
  id: string;
  points: Point[];
  gt: string | null;
  ocr: Record<string, string>;
}

export interface RegionView {
  id: string;
  kind: string; // element tag, e.g. "TextRegion"
  type: string | null; // semantic subtype on text regions
  points: Point[];
  lines: LineView[];
}

export class DocumentError extends Error {}

export function parsePoints(value: string): Point[] {
  if (!value.trim()) return [];
  return value
    .trim()
    .split(/\s+/)
    .map((pair) => {
      const [x, y] = pair.split(",").map(Number);
      return [x, y] as Point;
    });
}

export function formatPoints(points: Point[]): string {
  return points.map(([x, y]) => `${x},${y}`).join(" ");
}

function elementChildren(parent: Element): Element[] {
  const out: Element[] = [];
  for (let node = parent.firstChild; node; node = node.nextSibling) {
    if (node.nodeType === 1) out.push(node as Element);
  }
  return out;
}

function children(parent: Element, tag: string): Element[] {
  return elementChildren(parent).filter((el) => el.localName === tag);
}

/**
 * Editable client-side page document. All geometry stays in page pixel
 * space; no validation is duplicated here — the server is the authority
 * and the document is only clean once a save was acknowledged.
 */
export class PageDocument {
  dirty = false;

  private constructor(
    private readonly dom: Document,
    public revision: string,
  ) {}

  static parse(xml: string, revision = ""): PageDocument {
    const dom = new DOMParser().parseFromString(xml, "application/xml");
    const root = dom.documentElement;
    if (!root || root.localName !== "PcGts" || root.namespaceURI !== PAGE_NS) {
      throw new DocumentError("not a page document");
    }
    return new PageDocument(dom, revision);
  }

  serialize(): string {
    return new XMLSerializer().serializeToString(this.dom);
  }

  private page(): Element {
    const page = this.dom.getElementsByTagNameNS(PAGE_NS, "Page")[0];
    if (!page) throw new DocumentError("missing Page element");
    return page;
  }

  get width(): number {
    return Number(this.page().getAttribute("imageWidth"));
  }

  get height(): number {
    return Number(this.page().getAttribute("imageHeight"));
  }

  private regionElements(): Element[] {
    return elementChildren(this.page()).filter((el) =>
      REGION_TAGS.includes(el.localName ?? ""),
    );
  }

  private regionElement(regionId: string): Element {
    const found = this.regionElements().find((el) => el.getAttribute("id") === regionId);
    if (!found) throw new DocumentError(`unknown region ${regionId}`);
    return found;
  }

  private coords(el: Element): Element {
    let coords = children(el, "Coords")[0];
    if (!coords) {
      coords = this.dom.createElementNS(PAGE_NS, "Coords");
      coords.setAttribute("points", "");
      el.insertBefore(coords, el.firstChild);
    }
    return coords;
  }

  regions(): RegionView[] {
    return this.regionElements().map((el) => ({
      id: el.getAttribute("id") ?? "",
      kind: el.localName ?? "",
      type: el.getAttribute("type"),
      points: parsePoints(this.coords(el).getAttribute("points") ?? ""),
      lines: children(el, "TextLine").map((line) => this.lineView(line)),
    }));
  }

  region(regionId: string): RegionView {
    const view = this.regions().find((r) => r.id === regionId);
    if (!view) throw new DocumentError(`unknown region ${regionId}`);
    return view;
  }

  private lineView(line: Element): LineView {
    let gt: string | null = null;
    const ocr: Record<string, string> = {};
    for (const equiv of children(line, "TextEquiv")) {
      const text = children(equiv, "Unicode")[0]?.textContent ?? "";
      if (equiv.getAttribute("index") === "0") gt = text;
      else ocr[equiv.getAttribute("comments") ?? ""] = text;
    }
    return {
      id: line.getAttribute("id") ?? "",
      points: parsePoints(this.coords(line).getAttribute("points") ?? ""),
      gt,
      ocr,
    };
  }

  lines(): LineView[] {
    const byRegion = new Map(this.regions().map((r) => [r.id, r.lines]));
    const ordered = this.readingOrder().flatMap((id) => byRegion.get(id) ?? []);
    const inOrder = new Set(this.readingOrder());
    for (const region of this.regions()) {
      if (!inOrder.has(region.id)) ordered.push(...region.lines);
    }
    return ordered;
  }

  // -- reading order ------------------------------------------------------

  private orderedGroup(create = false): Element | null {
    let order = children(this.page(), "ReadingOrder")[0];
    if (!order && !create) return null;
    if (!order) {
      order = this.dom.createElementNS(PAGE_NS, "ReadingOrder");
      this.page().insertBefore(order, this.page().firstChild);
    }
    let group = children(order, "OrderedGroup")[0];
    if (!group) {
      group = this.dom.createElementNS(PAGE_NS, "OrderedGroup");
      group.setAttribute("id", "ro");
      order.appendChild(group);
    }
    return group;
  }

  private orderRefs(): Element[] {
    const group = this.orderedGroup();
    if (!group) return [];
    return children(group, "RegionRefIndexed").sort(
      (a, b) => Number(a.getAttribute("index")) - Number(b.getAttribute("index")),
    );
  }

  readingOrder(): string[] {
    return this.orderRefs().map((ref) => ref.getAttribute("regionRef") ?? "");
  }

  private writeReadingOrder(ids: string[]): void {
    const group = this.orderedGroup(true)!;
    for (const ref of children(group, "RegionRefIndexed")) group.removeChild(ref);
    ids.forEach((id, index) => {
      const ref = this.dom.createElementNS(PAGE_NS, "RegionRefIndexed");
      ref.setAttribute("index", String(index));
      ref.setAttribute("regionRef", id);
      group.appendChild(ref);
    });
  }

  /** Drag-and-drop move of a region to a target position; false = no-op. */
  moveRegion(regionId: string, toIndex: number): boolean {
    const order = this.readingOrder();
    const from = order.indexOf(regionId);
    if (from < 0) throw new DocumentError(`region ${regionId} not in reading order`);
    if (from === toIndex) return false;
    order.splice(from, 1);
    order.splice(toIndex, 0, regionId);
    this.writeReadingOrder(order);
    this.dirty = true;
    return true;
  }

  // -- region editing -----------------------------------------------------

  nextRegionId(): string {
    const used = new Set(this.regions().map((r) => r.id));
    for (let i = 1; ; i++) {
      const candidate = `r${String(i).padStart(4, "0")}`;
      if (!used.has(candidate)) return candidate;
    }
  }

  /** Rectangle tool: a new text region spanning two dragged corners. */
  addRectRegion(x0: number, y0: number, x1: number, y1: number, type = "paragraph"): string {
    const [xa, xb] = x0 <= x1 ? [x0, x1] : [x1, x0];
    const [ya, yb] = y0 <= y1 ? [y0, y1] : [y1, y0];
    return this.addPolygonRegion(
      [
        [xa, ya],
        [xb, ya],
        [xb, yb],
        [xa, yb],
      ],
      type,
    );
  }

  addPolygonRegion(points: Point[], type = "paragraph"): string {
    const id = this.nextRegionId();
    const region = this.dom.createElementNS(PAGE_NS, "TextRegion");
    region.setAttribute("id", id);
    region.setAttribute("type", type);
    const coords = this.dom.createElementNS(PAGE_NS, "Coords");
    coords.setAttribute("points", formatPoints(points));
    region.appendChild(coords);
    this.page().appendChild(region);
    this.writeReadingOrder([...this.readingOrder(), id]);
    this.dirty = true;
    return id;
  }

  setRegionPolygon(regionId: string, points: Point[]): void {
    this.coords(this.regionElement(regionId)).setAttribute("points", formatPoints(points));
    this.dirty = true;
  }

  setRegionType(regionId: string, type: string): void {
    this.regionElement(regionId).setAttribute("type", type);
    this.dirty = true;
  }

  /** Removing a region also removes its reading-order entry. */
  deleteRegion(regionId: string): void {
    const el = this.regionElement(regionId);
    el.parentNode?.removeChild(el);
    const order = this.readingOrder().filter((id) => id !== regionId);
    if (this.orderedGroup()) this.writeReadingOrder(order);
    this.dirty = true;
  }

  // -- point editing ------------------------------------------------------

  movePoint(regionId: string, index: number, point: Point): void {
    const points = this.region(regionId).points;
    points[index] = point;
    this.setRegionPolygon(regionId, points);
  }

  addPoint(regionId: string, index: number, point: Point): void {
    const points = this.region(regionId).points;
    points.splice(index, 0, point);
    this.setRegionPolygon(regionId, points);
  }

  deletePoint(regionId: string, index: number): void {
    const points = this.region(regionId).points;
    points.splice(index, 1);
    this.setRegionPolygon(regionId, points);
  }

  /** Multi-select drag: shift any number of points at once. */
  translatePoints(regionId: string, indices: number[], dx: number, dy: number): void {
    const points = this.region(regionId).points;
    for (const i of indices) points[i] = [points[i][0] + dx, points[i][1] + dy];
    this.setRegionPolygon(regionId, points);
  }
}
