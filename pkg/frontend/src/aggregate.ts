/** Seed aggregation at matched checkpoints for one metric. */

import { RunRow, SchemaError } from "./csv.js";

export type XAxis = "cost" | "wallclock" | "iteration";

export interface SeriesPoint {
  x: number;
  mean: number;
  stderr: number;
  median: number;
  nSeeds: number;
}

export interface Series {
  /** group label, e.g. "method=kt1, g=0" */
  label: string;
  points: SeriesPoint[];
}

const X_COLUMN: Record<XAxis, keyof RunRow> = {
  cost: "cumulative_cost",
  wallclock: "wallclock_s",
  iteration: "iteration",
};

export function mean(values: number[]): number {
  return values.reduce((a, b) => a + b, 0) / values.length;
}

export function stderr(values: number[]): number {
  if (values.length < 2) return 0;
  const m = mean(values);
  const varSum = values.reduce((a, b) => a + (b - m) * (b - m), 0) / (values.length - 1);
  return Math.sqrt(varSum / values.length);
}

export function median(values: number[]): number {
  const sorted = [...values].sort((a, b) => a - b);
  const mid = Math.floor(sorted.length / 2);
  return sorted.length % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
}

export interface AggregateOptions {
  metric: string;
  x: XAxis;
  groupBy: (keyof RunRow)[];
}

/**
 * Group rows and aggregate the metric over seeds at every iteration
 * checkpoint.  The x value reported for a checkpoint is the seed-mean of
 * the chosen x column there (for cost and iteration this is exact; for
 * wallclock it is the across-seed average).
 */
export function aggregate(rows: RunRow[], opts: AggregateOptions): Series[] {
  for (const key of opts.groupBy) {
    if (!(key in X_COLUMN ? false : true)) continue;
  }
  const metricRows = rows.filter((r) => r.metric_name === opts.metric);
  if (metricRows.length === 0) {
    throw new SchemaError(`no rows with metric_name='${opts.metric}'`);
  }
  const xcol = X_COLUMN[opts.x];
  const groups = new Map<string, RunRow[]>();
  for (const row of metricRows) {
    const key = opts.groupBy.map((k) => `${k}=${row[k]}`).join(", ");
    const bucket = groups.get(key);
    if (bucket) bucket.push(row);
    else groups.set(key, [row]);
  }
  const series: Series[] = [];
  for (const [label, groupRows] of [...groups.entries()].sort((a, b) => a[0].localeCompare(b[0]))) {
    const byIteration = new Map<number, RunRow[]>();
    for (const row of groupRows) {
      const bucket = byIteration.get(row.iteration);
      if (bucket) bucket.push(row);
      else byIteration.set(row.iteration, [row]);
    }
    const points: SeriesPoint[] = [];
    for (const it of [...byIteration.keys()].sort((a, b) => a - b)) {
      const bucket = byIteration.get(it)!;
      const values = bucket.map((r) => r.metric_value);
      points.push({
        x: mean(bucket.map((r) => Number(r[xcol]))),
        mean: mean(values),
        stderr: stderr(values),
        median: median(values),
        nSeeds: new Set(bucket.map((r) => r.seed)).size,
      });
    }
    series.push({ label, points });
  }
  return series;
}
