import { describe, expect, it } from "vitest";

import { renderLineChart, segmentPaths } from "../src/charts.js";

describe("gap rendering", () => {
  it("null values split the line into separate path segments", () => {
    const paths = segmentPaths([1, 2, null, 4, 5, null, 7], 0, 10);
    expect(paths.length).toBe(3);
    for (const d of paths) {
      expect(d.startsWith("M")).toBe(true);
    }
  });

  it("no nulls yields a single segment", () => {
    expect(segmentPaths([1, 2, 3], 0, 10).length).toBe(1);
  });

  it("all-null series yields no segments", () => {
    expect(segmentPaths([null, null], 0, 10).length).toBe(0);
  });

  it("chart DOM shows one path element per segment, never interpolating", () => {
    const container = document.createElement("div");
    renderLineChart(container, ["t0", "t1", "t2", "t3"], [
      { label: "flow", values: [1, null, 3, 4], color: "#123" },
    ]);
    const paths = container.querySelectorAll("path[data-series=flow]");
    expect(paths.length).toBe(2);
  });

  it("empty window renders the no-data placeholder", () => {
    const container = document.createElement("div");
    renderLineChart(container, [], [
      { label: "flow", values: [null, null], color: "#123" },
    ]);
    expect(container.textContent).toContain("no data");
    expect(container.querySelector("svg")).toBeNull();
  });
});
