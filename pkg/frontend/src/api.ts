/** Thin wrappers over the read-only graph service. */

import { GraphDocument } from "./types.js";

export function imageUrl(nodeId: string, base = ""): string {
  return `${base}/api/nodes/${encodeURIComponent(nodeId)}/image`;
}

export async function fetchDocument(base = ""): Promise<GraphDocument> {
  const resp = await fetch(`${base}/api/graph`);
  if (!resp.ok) {
    throw new Error(`GET /api/graph failed: ${resp.status}`);
  }
  const doc = (await resp.json()) as GraphDocument;
  if (doc.schema_version !== 1) {
    throw new Error(`unsupported document schema_version ${doc.schema_version}`);
  }
  return doc;
}

/** Fetch a node thumbnail as an object URL, asking the service for PNG
 * (browsers cannot decode the raw grayscale format it stores). */
export async function fetchImage(nodeId: string, base = ""): Promise<string> {
  const resp = await fetch(imageUrl(nodeId, base), { headers: { Accept: "image/png" } });
  if (!resp.ok) {
    throw new Error(`image for ${nodeId} failed: ${resp.status}`);
  }
  return URL.createObjectURL(await resp.blob());
}
