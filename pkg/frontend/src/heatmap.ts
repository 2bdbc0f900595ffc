import { el } from "./dom";
import { MatrixResponse, SharedFeaturesView } from "./types";

// Diverging scale centered at zero: negative scores read as "perceived
// different" and shade toward blue, positive toward red. Color is pure
// presentation; every displayed value comes from the API response.

export function cellColor(value: number, maxAbs: number): string {
  if (maxAbs <= 0) return "rgb(255,255,255)";
  const t = Math.max(-1, Math.min(1, value / maxAbs));
  const other = Math.round(255 - 155 * Math.abs(t));
  return t >= 0 ? `rgb(255,${other},${other})` : `rgb(${other},${other},255)`;
}

export function formatCell(value: number): string {
  return value.toFixed(1);
}

export interface CellSelection {
  rowId: string;
  colId: string;
  value: number;
  features: SharedFeaturesView | null;
}

export class HeatmapView {
  readonly root: HTMLElement;
  private inspector: HTMLElement;
  selected: CellSelection | null = null;

  constructor(private matrix: MatrixResponse) {
    this.inspector = el("div", { className: "cell-inspector" });
    this.root = el("div", { className: "heatmap" }, [this.renderGrid(), this.inspector]);
  }

  private featuresFor(rowId: string, colId: string): SharedFeaturesView | null {
    const shared = this.matrix.shared_features;
    if (!shared) return null;
    return shared[`${rowId}|${colId}`] ?? shared[`${colId}|${rowId}`] ?? null;
  }

  private renderGrid(): HTMLElement {
    const { item_ids, values } = this.matrix;
    const maxAbs = Math.max(...values.flat().map(Math.abs));
    const table = el("table", { className: "heatmap-grid" });
    const header = el("tr", {}, [el("th", { textContent: "" })]);
    for (const id of item_ids) header.appendChild(el("th", { textContent: id }));
    table.appendChild(header);
    item_ids.forEach((rowId, i) => {
      const row = el("tr", {}, [el("th", { textContent: rowId })]);
      item_ids.forEach((colId, j) => {
        const value = values[i][j];
        const cell = el("td", {
          textContent: formatCell(value),
          className: "heatmap-cell",
        });
        cell.style.backgroundColor = cellColor(value, maxAbs);
        cell.dataset.row = rowId;
        cell.dataset.col = colId;
        cell.addEventListener("click", () => this.select(rowId, colId, value));
        row.appendChild(cell);
      });
      table.appendChild(row);
    });
    return table;
  }

  select(rowId: string, colId: string, value: number): void {
    this.selected = { rowId, colId, value, features: this.featuresFor(rowId, colId) };
    this.inspector.replaceChildren();
    this.inspector.appendChild(
      el("h3", { textContent: `${rowId} x ${colId}: ${formatCell(value)}` }),
    );
    const features = this.selected.features;
    if (!features) {
      this.inspector.appendChild(
        el("p", { textContent: "no feature breakdown available for this pair" }),
      );
      return;
    }
    const section = (title: string, items: string[]) =>
      el("div", { className: "feature-list" }, [
        el("h4", { textContent: title }),
        el("ul", {}, items.map((f) => el("li", { textContent: f }))),
      ]);
    this.inspector.appendChild(section("shared", features.shared));
    this.inspector.appendChild(section(`only ${rowId}`, features.only_a));
    this.inspector.appendChild(section(`only ${colId}`, features.only_b));
  }
}

/** Placeholder shown when no matrix has been computed for a series yet. */
export function missingMatrixPrompt(onCompute: () => void): HTMLElement {
  const button = el("button", { textContent: "compute similarity matrix" });
  button.addEventListener("click", onCompute);
  return el("div", { className: "missing-matrix" }, [
    el("p", { textContent: "no similarity matrix computed for this series yet" }),
    button,
  ]);
}
