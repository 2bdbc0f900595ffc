import { describe, expect, it } from "vitest";

import { HeatmapView, cellColor, formatCell, missingMatrixPrompt } from "../src/heatmap";
import { MatrixResponse } from "../src/types";

// Sentinel values nothing in the UI could plausibly recompute: displayed
// numbers must be exactly these, proving they originate from the API.
const MATRIX: MatrixResponse = {
  kind: "contextual",
  params: { theta: 1, alpha: 0.5, beta: 0.5 },
  item_ids: ["MCQ1", "MCQ2", "MCQ3"],
  values: [
    [6.0, -6.5, 3.7],
    [-6.5, 7.0, -2.0],
    [3.7, -2.0, 6.0],
  ],
  summary: {
    mean: -1.6,
    sd: 4.46,
    minimum: -6.5,
    maximum: 3.7,
    prototype_mean: -1.4,
    prototype_sd: 5.1,
  },
  csv: "",
  shared_features: {
    "MCQ1|MCQ3": { shared: ["measles", "human health"], only_a: ["campaign"], only_b: ["school"] },
  },
};

describe("heatmap rendering", () => {
  it("every displayed cell equals the API value at displayed precision", () => {
    const view = new HeatmapView(MATRIX);
    const cells = view.root.querySelectorAll("td.heatmap-cell");
    expect(cells.length).toBe(9);
    const texts = [...cells].map((c) => c.textContent);
    const expected = MATRIX.values.flat().map((v) => v.toFixed(1));
    expect(texts).toEqual(expected);
  });

  it("grid is rendered symmetric like the input", () => {
    const view = new HeatmapView(MATRIX);
    const cell = (r: string, c: string) =>
      view.root.querySelector(`td[data-row="${r}"][data-col="${c}"]`)!.textContent;
    expect(cell("MCQ1", "MCQ2")).toBe(cell("MCQ2", "MCQ1"));
    expect(cell("MCQ1", "MCQ3")).toBe(cell("MCQ3", "MCQ1"));
  });

  it("diverging color scale is centered at zero", () => {
    expect(cellColor(5, 10)).not.toBe(cellColor(-5, 10));
    expect(cellColor(0, 10)).toBe("rgb(255,255,255)");
    // negative shades toward blue (blue channel saturated)
    expect(cellColor(-10, 10)).toBe("rgb(100,100,255)");
    expect(cellColor(10, 10)).toBe("rgb(255,100,100)");
  });

  it("cell click reveals shared and unique features from the response", () => {
    const view = new HeatmapView(MATRIX);
    const cell = view.root.querySelector(
      'td[data-row="MCQ1"][data-col="MCQ3"]',
    ) as HTMLElement;
    cell.click();
    expect(view.selected).toMatchObject({ rowId: "MCQ1", colId: "MCQ3", value: 3.7 });
    expect(view.selected!.features!.shared).toEqual(["measles", "human health"]);
    const inspector = view.root.querySelector(".cell-inspector")!;
    expect(inspector.textContent).toContain("measles");
    expect(inspector.textContent).toContain("only MCQ1");
  });

  it("single-item matrix renders one diagonal cell", () => {
    const single: MatrixResponse = {
      ...MATRIX,
      item_ids: ["MCQ1"],
      values: [[6.0]],
      shared_features: {},
    };
    const view = new HeatmapView(single);
    const cells = view.root.querySelectorAll("td.heatmap-cell");
    expect(cells.length).toBe(1);
    expect(cells[0].textContent).toBe("6.0");
  });

  it("formatCell uses one decimal everywhere", () => {
    expect(formatCell(-6.5)).toBe("-6.5");
    expect(formatCell(0)).toBe("0.0");
    expect(formatCell(3.71)).toBe("3.7");
  });

  it("missing matrix shows a call-to-compute prompt", () => {
    let computed = 0;
    const prompt = missingMatrixPrompt(() => {
      computed += 1;
    });
    (prompt.querySelector("button") as HTMLButtonElement).click();
    expect(computed).toBe(1);
    expect(prompt.textContent).toContain("no similarity matrix");
  });
});
