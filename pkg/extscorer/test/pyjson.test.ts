import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { Float, formatFloat, pyRepr, serialize } from "../src/pyjson";

const FIXTURES = new URL("../fixtures/", import.meta.url);

describe("formatFloat", () => {
  it("matches the recorded Python reprs", () => {
    const pairs: [number, string][] = JSON.parse(
      readFileSync(new URL("pyfloat.json", FIXTURES), "utf-8"),
    );
    expect(pairs.length).toBeGreaterThan(15);
    for (const [value, repr] of pairs) {
      expect(formatFloat(value), `repr of ${value}`).toBe(repr);
    }
  });

  it("renders negative zero with its sign", () => {
    expect(formatFloat(-0)).toBe("-0.0");
    expect(formatFloat(0)).toBe("0.0");
  });

  it("renders non-finite values the way json.dumps does", () => {
    expect(formatFloat(Infinity)).toBe("Infinity");
    expect(formatFloat(-Infinity)).toBe("-Infinity");
    expect(formatFloat(NaN)).toBe("NaN");
  });

  it("keeps a fractional part on integral floats", () => {
    expect(formatFloat(2)).toBe("2.0");
    expect(formatFloat(-120)).toBe("-120.0");
  });

  it("pads exponents to two digits with an explicit sign", () => {
    expect(formatFloat(1e-7)).toBe("1e-07");
    expect(formatFloat(1e16)).toBe("1e+16");
    expect(formatFloat(2.5e-120)).toBe("2.5e-120");
  });
});

describe("serialize", () => {
  it("minifies with insertion-order keys", () => {
    expect(serialize({ id: 3, pong: true })).toBe('{"id":3,"pong":true}');
    expect(serialize({ pong: true, id: 3 })).toBe('{"pong":true,"id":3}');
  });

  it("renders Float-wrapped numbers as Python floats", () => {
    expect(serialize({ id: 1, logprob: new Float(-12) })).toBe(
      '{"id":1,"logprob":-12.0}',
    );
    expect(serialize(new Float(0.1))).toBe("0.1");
  });

  it("renders bare integral numbers as integers", () => {
    expect(serialize({ id: 7 })).toBe('{"id":7}');
    expect(serialize(3.5)).toBe("3.5");
  });

  it("escapes non-ASCII and control characters like ensure_ascii", () => {
    expect(serialize("café")).toBe('"caf\\u00e9"');
    expect(serialize("a\tb\nc")).toBe('"a\\tb\\nc"');
    expect(serialize("")).toBe('"\\u0001"');
    expect(serialize("😀")).toBe('"\\ud83d\\ude00"');
  });

  it("handles nested arrays and null", () => {
    expect(serialize({ a: [1, "x", null, false] })).toBe('{"a":[1,"x",null,false]}');
  });
});

describe("pyRepr", () => {
  it("quotes strings like Python repr", () => {
    expect(pyRepr("frob")).toBe("'frob'");
    expect(pyRepr("it's")).toBe("\"it's\"");
    expect(pyRepr("a\nb")).toBe("'a\\nb'");
  });

  it("renders non-string scalars like Python", () => {
    expect(pyRepr(null)).toBe("None");
    expect(pyRepr(undefined)).toBe("None");
    expect(pyRepr(true)).toBe("True");
    expect(pyRepr(false)).toBe("False");
    expect(pyRepr(3)).toBe("3");
    expect(pyRepr(3.5)).toBe("3.5");
  });

  it("renders containers recursively", () => {
    expect(pyRepr(["a", 1])).toBe("['a', 1]");
    expect(pyRepr({ op: "x" })).toBe("{'op': 'x'}");
  });
});
