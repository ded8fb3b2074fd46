import { describe, expect, it } from "vitest";

import { ViewState } from "../src/viewstate.js";

describe("ViewState", () => {
  it("keeps the active element across view switches", () => {
    const state = new ViewState();
    state.setPage("0001");
    state.setActiveElement("r0001_l001");
    for (const view of ["lines", "text-overlay", "text-synoptic", "regions"] as const) {
      state.setView(view);
      expect(state.activeView).toBe(view);
      expect(state.activeElementId).toBe("r0001_l001");
    }
  });

  it("clears selection and transform when the page changes", () => {
    const state = new ViewState();
    state.setPage("0001");
    state.setActiveElement("ra");
    state.setTransform({ zoom: 2, panX: 30 });
    state.setPage("0001"); // same page: nothing resets
    expect(state.activeElementId).toBe("ra");
    state.setPage("0002");
    expect(state.activeElementId).toBeNull();
    expect(state.transform).toEqual({ zoom: 1, panX: 0, panY: 0 });
  });

  it("zoom is a display transform over page-pixel coordinates", () => {
    const state = new ViewState();
    state.setTransform({ zoom: 2, panX: 10, panY: 20 });
    expect(state.toScreen(100, 50)).toEqual([210, 120]);
    expect(state.toPage(210, 120)).toEqual([100, 50]);
  });
});
