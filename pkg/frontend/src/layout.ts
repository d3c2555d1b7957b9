// Seeded force-directed layout. Determinism is not required client-side,
// but seeding by case id keeps a case's picture stable across reloads.

import type { GraphEdgeOut, GraphNodeOut } from "./api.js";

export interface LayoutNode {
  id: string;
  kind: "review" | "entity";
  role?: string;
  x: number;
  y: number;
  radius: number;
}

export interface LayoutEdge {
  kind: string;
  source: LayoutNode;
  target: LayoutNode;
  weight?: number;
  relation?: string;
}

export interface Layout {
  nodes: LayoutNode[];
  edges: LayoutEdge[];
  width: number;
  height: number;
}

// mulberry32: tiny deterministic PRNG, good enough for seeding a layout
function seededRandom(seedText: string): () => number {
  let h = 1779033703;
  for (let i = 0; i < seedText.length; i++) {
    h = Math.imul(h ^ seedText.charCodeAt(i), 3432918353);
    h = (h << 13) | (h >>> 19);
  }
  let a = h >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const ITERATIONS = 150;
const REPULSION = 1800;
const SPRING = 0.02;
const SPRING_LENGTH = 70;
const CENTER_PULL = 0.012;

export function computeLayout(
  nodes: GraphNodeOut[],
  edges: GraphEdgeOut[],
  seed: string,
  width = 900,
  height = 600,
): Layout {
  const rand = seededRandom(seed);
  const laid: LayoutNode[] = nodes.map((n) => ({
    id: n.id,
    kind: n.kind,
    role: n.role,
    x: width / 2 + (rand() - 0.5) * width * 0.8,
    y: height / 2 + (rand() - 0.5) * height * 0.8,
    // entity nodes render larger so sharing structure stands out
    radius: n.kind === "entity" ? 11 : n.role === "meta" ? 9 : 6,
  }));
  const byId = new Map(laid.map((n) => [n.id, n]));
  const springs = edges
    .filter((e) => byId.has(e.source) && byId.has(e.target))
    .map((e) => ({
      kind: e.kind,
      source: byId.get(e.source)!,
      target: byId.get(e.target)!,
      weight: e.weight,
      relation: e.relation,
    }));

  for (let round = 0; round < ITERATIONS; round++) {
    const cooling = 1 - round / ITERATIONS;
    for (const a of laid) {
      let fx = (width / 2 - a.x) * CENTER_PULL;
      let fy = (height / 2 - a.y) * CENTER_PULL;
      for (const b of laid) {
        if (a === b) continue;
        const dx = a.x - b.x;
        const dy = a.y - b.y;
        const dist2 = Math.max(dx * dx + dy * dy, 25);
        const push = REPULSION / dist2;
        const dist = Math.sqrt(dist2);
        fx += (dx / dist) * push;
        fy += (dy / dist) * push;
      }
      a.x += fx * cooling;
      a.y += fy * cooling;
    }
    for (const s of springs) {
      const dx = s.target.x - s.source.x;
      const dy = s.target.y - s.source.y;
      const dist = Math.max(Math.sqrt(dx * dx + dy * dy), 1);
      const pull = SPRING * (dist - SPRING_LENGTH) * cooling;
      const ux = dx / dist;
      const uy = dy / dist;
      s.source.x += ux * pull;
      s.source.y += uy * pull;
      s.target.x -= ux * pull;
      s.target.y -= uy * pull;
    }
    for (const n of laid) {
      n.x = Math.min(Math.max(n.x, 20), width - 20);
      n.y = Math.min(Math.max(n.y, 20), height - 20);
    }
  }
  return { nodes: laid, edges: springs, width, height };
}
