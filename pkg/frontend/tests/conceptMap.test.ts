import { describe, expect, it } from "vitest";

import { flattenNodes, parseConceptMap, selectableLabels } from "../src/conceptMap";

const MAP_TEXT = [
  "1. Biological Processes",
  "   - Photosynthesis",
  "     - Definition: light energy becomes chemical energy",
  "     - Location: Chloroplasts",
  "   - Cellular Respiration",
  "     - Location: Mitochondria",
  "6. Ecological Roles",
  "   - Photosynthesis",
  "     - Primary producers (base of food chains)",
  "   - Cellular Respiration",
  "     - Returns CO2 to the atmosphere",
].join("\n");

describe("parseConceptMap", () => {
  it("builds a tree with indentation depth", () => {
    const roots = parseConceptMap(MAP_TEXT);
    expect(roots.map((n) => n.label)).toEqual(["1. Biological Processes", "6. Ecological Roles"]);
    expect(roots[0].children.map((n) => n.label)).toEqual([
      "Photosynthesis",
      "Cellular Respiration",
    ]);
    expect(roots[0].children[0].children[1].label).toBe("Location: Chloroplasts");
  });

  it("strips bullet markers but keeps numbering", () => {
    const roots = parseConceptMap("1. Top\n   - Bullet child\n   • Dot child");
    expect(roots[0].children.map((n) => n.label)).toEqual(["Bullet child", "Dot child"]);
  });

  it("flattens depth-first", () => {
    const flat = flattenNodes(parseConceptMap(MAP_TEXT)).map((n) => n.label);
    expect(flat[0]).toBe("1. Biological Processes");
    expect(flat).toContain("Returns CO2 to the atmosphere");
    expect(flat.length).toBe(11);
  });

  it("selectable labels are the numbered nodes", () => {
    expect(selectableLabels(parseConceptMap(MAP_TEXT))).toEqual([
      "1. Biological Processes",
      "6. Ecological Roles",
    ]);
  });

  it("ignores blank lines", () => {
    const roots = parseConceptMap("\n1. One\n\n2. Two\n\n");
    expect(roots.length).toBe(2);
  });
});
