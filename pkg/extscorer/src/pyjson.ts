/**
 * JSON rendering that matches CPython's `json.dumps(obj, separators=(",", ":"))`
 * byte for byte.
 *
 * The scoring protocol is consumed by clients that record and byte-compare
 * transcripts, and the native scorer answers through CPython's serializer.
 * A response from this server must therefore render floats in Python's
 * repr form ("2.0", "-0.0", "1e-07"), keep object keys in insertion order,
 * escape non-ASCII as \uXXXX, and use minified separators.
 */

/** Marks a number as carrying float semantics: integral values render with ".0". */
export class Float {
  constructor(readonly value: number) {}
}

export type JsonValue =
  | null
  | boolean
  | number
  | string
  | Float
  | JsonValue[]
  | { [key: string]: JsonValue };

/**
 * Render a double the way Python's float repr does.
 *
 * Both Python and JS produce the shortest digit string that round-trips,
 * with identical tie-breaking, so the digits agree; only the surface form
 * differs.  Python uses positional notation for first-digit exponents in
 * [-4, 16) and exponential with a signed two-digit-minimum exponent
 * otherwise, and always keeps a fractional part in positional form.
 */
export function formatFloat(x: number): string {
  if (Number.isNaN(x)) return "NaN";
  if (x === Infinity) return "Infinity";
  if (x === -Infinity) return "-Infinity";
  if (x === 0) return Object.is(x, -0) ? "-0.0" : "0.0";

  const sign = x < 0 ? "-" : "";
  const plain = String(Math.abs(x));

  // Decompose the JS rendering into significant digits plus the exponent
  // of the leading digit.
  let digits: string;
  let exponent: number;
  const eIdx = plain.indexOf("e");
  if (eIdx !== -1) {
    digits = plain.slice(0, eIdx).replace(".", "");
    exponent = Number(plain.slice(eIdx + 1));
  } else {
    const dot = plain.indexOf(".");
    if (dot === -1) {
      digits = plain;
      exponent = plain.length - 1;
    } else if (plain.startsWith("0.")) {
      const frac = plain.slice(2);
      const stripped = frac.replace(/^0+/, "");
      exponent = -(frac.length - stripped.length) - 1;
      digits = stripped;
    } else {
      digits = plain.slice(0, dot) + plain.slice(dot + 1);
      exponent = dot - 1;
    }
  }
  digits = digits.replace(/0+$/, "");

  if (exponent >= -4 && exponent < 16) {
    if (exponent >= digits.length - 1) {
      return sign + digits + "0".repeat(exponent - digits.length + 1) + ".0";
    }
    if (exponent >= 0) {
      return sign + digits.slice(0, exponent + 1) + "." + digits.slice(exponent + 1);
    }
    return sign + "0." + "0".repeat(-exponent - 1) + digits;
  }
  const mantissa = digits.length > 1 ? digits[0] + "." + digits.slice(1) : digits;
  const eSign = exponent < 0 ? "-" : "+";
  return sign + mantissa + "e" + eSign + String(Math.abs(exponent)).padStart(2, "0");
}

/** Render a string as a JSON literal with ensure_ascii semantics. */
function quoteAscii(s: string): string {
  let out = '"';
  for (let i = 0; i < s.length; i++) {
    const ch = s[i];
    const code = s.charCodeAt(i);
    if (ch === '"') out += '\\"';
    else if (ch === "\\") out += "\\\\";
    else if (ch === "\b") out += "\\b";
    else if (ch === "\f") out += "\\f";
    else if (ch === "\n") out += "\\n";
    else if (ch === "\r") out += "\\r";
    else if (ch === "\t") out += "\\t";
    else if (code < 0x20 || code > 0x7e) out += "\\u" + code.toString(16).padStart(4, "0");
    else out += ch;
  }
  return out + '"';
}

/**
 * Serialize a value with minified separators and insertion-order keys.
 *
 * Bare numbers render as integers when integral — use `Float` to force
 * float semantics.  A JSON float that happens to be integral (e.g. an id
 * sent as 3.0) is indistinguishable from the integer after parsing, so it
 * would be echoed back as "3"; the clients of this protocol only ever use
 * integer ids.
 */
export function serialize(value: JsonValue): string {
  if (value instanceof Float) return formatFloat(value.value);
  if (value === null) return "null";
  if (value === true) return "true";
  if (value === false) return "false";
  if (typeof value === "number") {
    return Number.isSafeInteger(value) ? String(value) : formatFloat(value);
  }
  if (typeof value === "string") return quoteAscii(value);
  if (Array.isArray(value)) {
    return "[" + value.map(serialize).join(",") + "]";
  }
  const parts: string[] = [];
  for (const [key, entry] of Object.entries(value)) {
    parts.push(quoteAscii(key) + ":" + serialize(entry));
  }
  return "{" + parts.join(",") + "}";
}

/** Render a Python str repr: preferred single quotes, double when cleaner. */
function strRepr(s: string): string {
  const quote = s.includes("'") && !s.includes('"') ? '"' : "'";
  let out = quote;
  for (const ch of s) {
    const cp = ch.codePointAt(0) ?? 0;
    if (ch === "\\") out += "\\\\";
    else if (ch === quote) out += "\\" + ch;
    else if (ch === "\n") out += "\\n";
    else if (ch === "\r") out += "\\r";
    else if (ch === "\t") out += "\\t";
    else if (cp < 0x20 || cp === 0x7f) out += "\\x" + cp.toString(16).padStart(2, "0");
    else out += ch;
  }
  return out + quote;
}

/**
 * Python repr of a parsed JSON value, for diagnostics that quote request
 * fields the way the native implementation's `{value!r}` messages do.
 */
export function pyRepr(value: unknown): string {
  if (value === null || value === undefined) return "None";
  if (value === true) return "True";
  if (value === false) return "False";
  if (typeof value === "number") {
    return Number.isSafeInteger(value) ? String(value) : formatFloat(value);
  }
  if (typeof value === "string") return strRepr(value);
  if (Array.isArray(value)) {
    return "[" + value.map(pyRepr).join(", ") + "]";
  }
  if (typeof value === "object") {
    const parts: string[] = [];
    for (const [key, entry] of Object.entries(value)) {
      parts.push(strRepr(key) + ": " + pyRepr(entry));
    }
    return "{" + parts.join(", ") + "}";
  }
  return String(value);
}
