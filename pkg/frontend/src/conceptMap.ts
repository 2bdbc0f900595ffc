// Display-only parser for the concept-map hierarchy text. The raw text
// stays the authoritative artifact server-side; this just gives the
// reviewer an indented tree with selectable node labels.

export interface ConceptNode {
  label: string;
  depth: number;
  children: ConceptNode[];
}

const BULLET = /^[-*•●○▪]\s*/;

function depthOf(line: string): number {
  const indent = line.length - line.trimStart().length;
  return Math.floor(indent / 2);
}

function labelOf(line: string): string {
  return line.trim().replace(BULLET, "").trim();
}

/** Parse indented/numbered hierarchy text into a tree of nodes. */
export function parseConceptMap(text: string): ConceptNode[] {
  const roots: ConceptNode[] = [];
  const stack: ConceptNode[] = [];
  for (const raw of text.split("\n")) {
    if (!raw.trim()) continue;
    const node: ConceptNode = { label: labelOf(raw), depth: depthOf(raw), children: [] };
    while (stack.length > 0 && stack[stack.length - 1].depth >= node.depth) {
      stack.pop();
    }
    if (stack.length === 0) {
      roots.push(node);
    } else {
      stack[stack.length - 1].children.push(node);
    }
    stack.push(node);
  }
  return roots;
}

export function flattenNodes(nodes: ConceptNode[]): ConceptNode[] {
  const out: ConceptNode[] = [];
  const walk = (list: ConceptNode[]) => {
    for (const node of list) {
      out.push(node);
      walk(node.children);
    }
  };
  walk(nodes);
  return out;
}

/** Top-level numbered nodes are the natural selection targets. */
export function selectableLabels(nodes: ConceptNode[]): string[] {
  return flattenNodes(nodes)
    .filter((n) => /^\d+\./.test(n.label))
    .map((n) => n.label);
}
