/**
 * Add-k smoothed n-gram language model over token sequences.
 *
 * Reads the JSON model files written by the pipeline's native scorer and
 * reproduces its scores exactly: the same backoff recursion, the same
 * sentence-marker padding, the same operation order inside the smoothing
 * formula, and the same log accumulation, so a conversation served from a
 * model file is interchangeable with one served by the trainer that wrote
 * it.
 *
 * Probability of a token v after context c at order m:
 *
 *     p_m(v | c) = (count(c, v) + k * E * p_{m-1}(v | c[1:]))
 *                  / (count(c) + k * E)
 *
 * where E is the emission alphabet size (vocabulary plus the unknown
 * symbol) and the order-0 prior is uniform 1 / E.  With k = 0 the model is
 * maximum likelihood and backs off only on unseen contexts.
 */
import { readFileSync } from "node:fs";

import { pyRepr } from "./pyjson.js";

export const BOS = "<s>";
export const EOS = "</s>";
export const UNK = "<unk>";
export const MODEL_FORMAT = "lfnsum-ngram";

/** Raised when a model file is unreadable or not a model file at all. */
export class ModelFileError extends Error {}

/** Raised when a scoring request carries an unusable token sequence. */
export class ScoringError extends Error {}

interface ModelFile {
  format?: unknown;
  order: number;
  k: number;
  sentence_markers: boolean;
  normalization?: string;
  vocab: string[];
  counts: Record<string, Record<string, Record<string, number>>>;
}

/** Coerce a request field to a non-empty list of non-empty string tokens. */
export function asTokenList(value: unknown, name: string): string[] {
  if (!Array.isArray(value)) {
    throw new ScoringError(`${name} must be an array of tokens`);
  }
  if (value.length === 0) {
    throw new ScoringError(`${name} must contain at least one token`);
  }
  for (const token of value) {
    if (typeof token !== "string" || token === "") {
      throw new ScoringError(
        `${name} contains a non-string or empty token: ${pyRepr(token)}`,
      );
    }
  }
  return value as string[];
}

export class NgramModel {
  readonly order: number;
  readonly k: number;
  readonly sentenceMarkers: boolean;
  readonly normalization: "total" | "per_token";
  readonly vocab: ReadonlySet<string>;
  readonly emissionSize: number;
  private readonly counts: Map<number, Map<string, Map<string, number>>>;
  private readonly totals: Map<number, Map<string, number>>;

  private constructor(data: ModelFile, source: string) {
    const { order, k, sentence_markers: markers, normalization = "total" } = data;
    if (!Number.isInteger(order) || order < 1) {
      throw new ModelFileError(`${source}: order must be a positive integer`);
    }
    if (typeof k !== "number" || !(k >= 0)) {
      throw new ModelFileError(`${source}: k must be a non-negative number`);
    }
    if (normalization !== "total" && normalization !== "per_token") {
      throw new ModelFileError(`${source}: unknown normalization ${pyRepr(normalization)}`);
    }
    this.order = order;
    this.k = k;
    this.sentenceMarkers = Boolean(markers);
    this.normalization = normalization;
    this.vocab = new Set(data.vocab);
    this.emissionSize = this.vocab.size + 1;

    this.counts = new Map();
    this.totals = new Map();
    for (const [m, table] of Object.entries(data.counts)) {
      const contexts = new Map<string, Map<string, number>>();
      const sums = new Map<string, number>();
      for (const [ctx, counter] of Object.entries(table)) {
        const tokens = new Map<string, number>();
        let sum = 0;
        for (const [token, count] of Object.entries(counter)) {
          tokens.set(token, count);
          sum += count;
        }
        contexts.set(ctx, tokens);
        sums.set(ctx, sum);
      }
      this.counts.set(Number(m), contexts);
      this.totals.set(Number(m), sums);
    }
  }

  /** Restore a model serialized by the native scorer's save(). */
  static load(path: string): NgramModel {
    let raw: string;
    try {
      raw = readFileSync(path, "utf-8");
    } catch (err) {
      throw new ModelFileError(`cannot read model file ${path}: ${(err as Error).message}`);
    }
    let data: ModelFile;
    try {
      data = JSON.parse(raw) as ModelFile;
    } catch {
      throw new ModelFileError(`not a language model file: ${path}`);
    }
    if (data === null || typeof data !== "object" || data.format !== MODEL_FORMAT) {
      throw new ModelFileError(`not a language model file: ${path}`);
    }
    return new NgramModel(data, path);
  }

  private markersActive(): boolean {
    return this.sentenceMarkers && this.order > 1;
  }

  private mapToken(token: string): string {
    return this.vocab.has(token) || token === BOS ? token : UNK;
  }

  /**
   * Smoothed probability of `token` after `context`.  Shorter contexts
   * score at the matching lower order; out-of-vocabulary tokens in either
   * position are mapped to the unknown symbol.
   */
  probability(token: string, context: readonly string[] = []): number {
    let ctx = context.map((t) => this.mapToken(t));
    if (ctx.length > this.order - 1) {
      ctx = ctx.slice(ctx.length - this.order + 1);
    }
    return this.prob(this.mapToken(token), ctx);
  }

  private prob(token: string, ctx: readonly string[]): number {
    const m = ctx.length + 1;
    let count: number;
    let total: number;
    let prior: number;
    if (m === 1) {
      count = this.counts.get(1)?.get("")?.get(token) ?? 0;
      total = this.totals.get(1)?.get("") ?? 0;
      prior = 1.0 / this.emissionSize;
    } else {
      const key = ctx.join(" ");
      count = this.counts.get(m)?.get(key)?.get(token) ?? 0;
      total = this.totals.get(m)?.get(key) ?? 0;
      prior = this.prob(token, ctx.slice(1));
    }
    if (this.k > 0) {
      const weight = this.k * this.emissionSize;
      return (count + weight * prior) / (total + weight);
    }
    if (total > 0) {
      return count / total;
    }
    return prior;
  }

  /** Scored (token, context) pairs with marker padding applied. */
  private *positions(
    tokens: readonly string[],
    condition: readonly string[] | null,
  ): Generator<readonly [string, readonly string[]]> {
    const pad = this.markersActive();
    const prefix: string[] = pad ? new Array<string>(this.order - 1).fill(BOS) : [];
    if (condition !== null) prefix.push(...condition);
    const seq = prefix.concat(tokens);
    if (condition === null && pad) seq.push(EOS);
    for (let i = prefix.length; i < seq.length; i++) {
      const lo = Math.max(0, i - this.order + 1);
      yield [seq[i], seq.slice(lo, i)];
    }
  }

  private score(
    tokens: readonly string[],
    condition: readonly string[] | null,
    denom: number,
  ): number {
    let total = 0.0;
    for (const [token, ctx] of this.positions(tokens, condition)) {
      const p = this.probability(token, ctx);
      total += p > 0.0 ? Math.log(p) : -Infinity;
    }
    if (this.normalization === "per_token") {
      return total / denom;
    }
    return total;
  }

  /** Natural-log probability of a token sequence, end marker included. */
  logprob(text: unknown): number {
    const tokens = asTokenList(text, "text");
    return this.score(tokens, null, tokens.length);
  }

  /**
   * Log probability of `target` given `condition` as prefix.  Only target
   * tokens contribute terms and no end marker is appended, so an empty
   * condition matches logprob up to the missing end-marker term — exactly,
   * when markers are disabled.
   */
  conditionalLogprob(target: unknown, condition: unknown): number {
    const targetTokens = asTokenList(target, "target");
    let conditionTokens: string[];
    if (condition === null || condition === undefined) {
      conditionTokens = [];
    } else if (Array.isArray(condition)) {
      for (const token of condition) {
        if (typeof token !== "string") {
          throw new ScoringError(
            `condition contains a non-string token: ${pyRepr(token)}`,
          );
        }
      }
      conditionTokens = condition as string[];
    } else {
      throw new ScoringError("condition must be an array of tokens");
    }
    return this.score(targetTokens, conditionTokens, targetTokens.length);
  }
}
