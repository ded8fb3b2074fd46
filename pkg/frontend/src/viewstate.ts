export type View = "regions" | "lines" | "text-overlay" | "text-synoptic";

export interface Transform {
  zoom: number;
  panX: number;
  panY: number;
}

/**
 * UI state shared by the interconnected views. Coordinates handed to the
 * document are always page pixels; zoom/pan is a pure display transform.
 */
export class ViewState {
  activeView: View = "regions";
  activePageId: string | null = null;
  activeElementId: string | null = null;
  transform: Transform = { zoom: 1, panX: 0, panY: 0 };
  dirty = false;

  /** Switching views keeps the active element selected. */
  setView(view: View): void {
    this.activeView = view;
  }

  setPage(pageId: string): void {
    if (pageId !== this.activePageId) {
      this.activePageId = pageId;
      this.activeElementId = null;
      this.transform = { zoom: 1, panX: 0, panY: 0 };
    }
  }

  setActiveElement(elementId: string | null): void {
    this.activeElementId = elementId;
  }

  setTransform(transform: Partial<Transform>): void {
    this.transform = { ...this.transform, ...transform };
  }

  /** Display position of a page-pixel coordinate under the current transform. */
  toScreen(x: number, y: number): [number, number] {
    const { zoom, panX, panY } = this.transform;
    return [x * zoom + panX, y * zoom + panY];
  }

  toPage(sx: number, sy: number): [number, number] {
    const { zoom, panX, panY } = this.transform;
    return [(sx - panX) / zoom, (sy - panY) / zoom];
  }
}
