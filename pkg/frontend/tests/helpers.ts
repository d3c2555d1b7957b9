// Shared test plumbing: fixture loading and a scripted fetch stub.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import type { AdoptionOut, CaseOut, GraphOut } from "../src/api.js";

const here = dirname(fileURLToPath(import.meta.url));

export function fixture<T>(name: string): T {
  return JSON.parse(
    readFileSync(join(here, "fixtures", name), "utf-8"),
  ) as T;
}

export const campaignCase = (): CaseOut => fixture<CaseOut>("campaign_case.json");
export const campaignGraph = (): GraphOut =>
  fixture<GraphOut>("campaign_graph.json");
export const soloCase = (): CaseOut => fixture<CaseOut>("solo_case.json");
export const soloGraph = (): GraphOut => fixture<GraphOut>("solo_graph.json");
export const adoptionEmpty = (): AdoptionOut =>
  fixture<AdoptionOut>("adoption_empty.json");
export const adoptionAfterAdopt = (): AdoptionOut =>
  fixture<AdoptionOut>("adoption_after_adopt.json");

type Responder = (url: string, init?: RequestInit) => unknown;

export interface FetchScript {
  /** route prefix match -> responder or literal payload */
  routes: Array<[string, Responder | unknown]>;
  /** when set, every fetch rejects (offline mode) */
  offline?: boolean;
  calls: Array<{ url: string; body?: unknown }>;
}

export function installFetch(script: FetchScript): void {
  globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    script.calls.push({
      url,
      body: init?.body ? JSON.parse(String(init.body)) : undefined,
    });
    if (script.offline) {
      throw new TypeError("network unreachable");
    }
    for (const [prefix, responder] of script.routes) {
      if (url.includes(prefix)) {
        const payload =
          typeof responder === "function"
            ? (responder as Responder)(url, init)
            : responder;
        if (payload === 404) {
          return new Response("{}", { status: 404 });
        }
        return new Response(JSON.stringify(payload), {
          status: 200,
          headers: { "Content-Type": "application/json" },
        });
      }
    }
    return new Response("{}", { status: 404 });
  }) as typeof fetch;
}
