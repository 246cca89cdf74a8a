/**
 * Line-delimited JSON scoring server.
 *
 * Speaks the pipeline's external-scorer protocol on a stream pair: one
 * JSON request per line, one response line per request, written as soon
 * as the request is handled, strictly serial.  Requests:
 *
 *     {"id": N, "op": "ping"}
 *     {"id": N, "op": "logprob", "text": ["tok", ...]}
 *     {"id": N, "op": "cond", "target": [...], "condition": [...]}
 *
 * Responses echo the request id: {"id": N, "pong": true} for pings,
 * {"id": N, "logprob": X} for scores, and {"id": N, "error": "..."} for
 * failures.  A line that does not parse as a JSON object is answered with
 * {"id": -1, "error": "malformed request line"} and the server keeps
 * reading; blank lines are skipped without a response.
 */
import * as readline from "node:readline";
import type { Readable, Writable } from "node:stream";

import { NgramModel, ScoringError } from "./model.js";
import { Float, JsonValue, pyRepr, serialize } from "./pyjson.js";

/**
 * Book-keeping for one serving session: which model is loaded, where it
 * runs, and how much work it has done.  Requests are handled one at a
 * time and every response carries the id of the request it answers.
 */
export interface ScorerSession {
  readonly model: string;
  readonly device: string;
  requestsHandled: number;
  tokensScored: number;
}

export function createSession(model: string): ScorerSession {
  return { model, device: "cpu", requestsHandled: 0, tokensScored: 0 };
}

function respond(payload: { [key: string]: JsonValue }): string {
  return serialize(payload);
}

const MALFORMED = respond({ id: -1, error: "malformed request line" });

/**
 * Handle one input line; returns the serialized response line, or null
 * for blank lines, which get no response.
 */
export function handleLine(
  model: NgramModel,
  session: ScorerSession,
  line: string,
): string | null {
  if (line.trim() === "") return null;

  let parsed: unknown;
  try {
    parsed = JSON.parse(line);
  } catch {
    return MALFORMED;
  }
  if (parsed === null || typeof parsed !== "object" || Array.isArray(parsed)) {
    // Valid JSON that is not an object cannot carry an op; answer like a
    // malformed line instead of tearing down the stream.
    return MALFORMED;
  }
  const request = parsed as Record<string, unknown>;
  const id = (request.id ?? null) as JsonValue;
  const op = request.op;
  session.requestsHandled += 1;

  if (op === "ping") {
    return respond({ id, pong: true });
  }
  if (op === "logprob") {
    return scored(session, id, () => {
      const value = model.logprob(request.text);
      return [value, (request.text as unknown[]).length];
    });
  }
  if (op === "cond") {
    return scored(session, id, () => {
      const value = model.conditionalLogprob(request.target, request.condition ?? []);
      return [value, (request.target as unknown[]).length];
    });
  }
  return respond({ id, error: `unknown op ${pyRepr(op)}` });
}

function scored(
  session: ScorerSession,
  id: JsonValue,
  evaluate: () => [number, number],
): string {
  try {
    const [value, tokenCount] = evaluate();
    session.tokensScored += tokenCount;
    return respond({ id, logprob: new Float(value) });
  } catch (err) {
    if (err instanceof ScoringError) {
      return respond({ id, error: err.message });
    }
    throw err;
  }
}

/** Serve the protocol until the input stream ends. */
export async function serve(
  input: Readable,
  output: Writable,
  model: NgramModel,
  session: ScorerSession,
): Promise<void> {
  const lines = readline.createInterface({ input, crlfDelay: Infinity });
  for await (const line of lines) {
    const response = handleLine(model, session, line);
    if (response !== null) {
      output.write(response + "\n");
    }
  }
}
