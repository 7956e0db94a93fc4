/** Reading and validating the run CSV emitted by the benchmark harness. */

export const REQUIRED_COLUMNS = [
  "run_id",
  "experiment",
  "method",
  "g",
  "N",
  "T",
  "seed",
  "iteration",
  "cumulative_cost",
  "wallclock_s",
  "metric_name",
  "metric_value",
] as const;

export interface RunRow {
  run_id: string;
  experiment: string;
  method: string;
  g: number;
  N: number;
  T: number;
  seed: number;
  iteration: number;
  cumulative_cost: number;
  wallclock_s: number;
  metric_name: string;
  metric_value: number;
}

export class SchemaError extends Error {}

function splitLine(line: string): string[] {
  // harness output never quotes fields, but tolerate simple quoting
  if (!line.includes('"')) return line.split(",");
  const out: string[] = [];
  let cur = "";
  let quoted = false;
  for (const ch of line) {
    if (ch === '"') quoted = !quoted;
    else if (ch === "," && !quoted) {
      out.push(cur);
      cur = "";
    } else cur += ch;
  }
  out.push(cur);
  return out;
}

export function parseRunCsv(text: string): RunRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new SchemaError("empty CSV");
  const header = splitLine(lines[0]);
  for (const col of REQUIRED_COLUMNS) {
    if (!header.includes(col)) throw new SchemaError(`missing required column '${col}'`);
  }
  const idx = new Map(header.map((h, i) => [h, i] as const));
  const rows: RunRow[] = [];
  for (let ln = 1; ln < lines.length; ln++) {
    const parts = splitLine(lines[ln]);
    if (parts.length !== header.length) {
      throw new SchemaError(`line ${ln + 1}: expected ${header.length} fields, got ${parts.length}`);
    }
    const get = (c: string) => parts[idx.get(c)!];
    const num = (c: string) => {
      const v = Number(get(c));
      if (!Number.isFinite(v) && get(c) !== "nan") {
        throw new SchemaError(`line ${ln + 1}: column '${c}' is not numeric: '${get(c)}'`);
      }
      return v;
    };
    rows.push({
      run_id: get("run_id"),
      experiment: get("experiment"),
      method: get("method"),
      g: num("g"),
      N: num("N"),
      T: num("T"),
      seed: num("seed"),
      iteration: num("iteration"),
      cumulative_cost: num("cumulative_cost"),
      wallclock_s: num("wallclock_s"),
      metric_name: get("metric_name"),
      metric_value: num("metric_value"),
    });
  }
  return rows;
}
