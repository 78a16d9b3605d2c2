import { parse } from 'papaparse';

/** One row of the sweep CSV produced by `wdmdbp sweep` / `wdmdbp evaluate`. */
export interface MetricsRow {
  method: string;
  nS: number;
  powerDbm: number;
  channel: string;
  gmi: number;
  nmseDb: number;
  seed: number;
  peakFlag: number;
}

/** A point of the peak-GMI-versus-steps figure. */
export interface StepsPoint {
  method: string;
  nS: number;
  gmi: number;
  fullField: boolean;
}

/** A point of the GMI-versus-power figure. */
export interface PowerPoint {
  powerDbm: number;
  gmi: number;
  peak: boolean;
}

export class TableError extends Error {}

const REQUIRED = [
  'method',
  'N_s',
  'power_dBm',
  'channel',
  'gmi_bits_per_4D',
  'nmse_dB',
  'seed',
  'peak_flag',
];

function asNumber(value: unknown, column: string, row: number): number {
  if (typeof value !== 'number' || !Number.isFinite(value)) {
    throw new TableError(`row ${row}: column '${column}' is not numeric (got ${JSON.stringify(value)})`);
  }
  return value;
}

/** Parse and validate the CSV text; throws TableError on anything malformed. */
export function parseMetricsCsv(text: string): MetricsRow[] {
  const parsed = parse<Record<string, unknown>>(text.trim(), {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new TableError(`malformed CSV: ${e.message}${e.row !== undefined ? ` (row ${e.row})` : ''}`);
  }
  const fields = parsed.meta.fields ?? [];
  for (const col of REQUIRED) {
    if (!fields.includes(col)) {
      throw new TableError(`missing column '${col}'`);
    }
  }
  if (parsed.data.length === 0) {
    throw new TableError('CSV has no data rows');
  }
  return parsed.data.map((raw, i) => ({
    method: String(raw['method']),
    nS: asNumber(raw['N_s'], 'N_s', i),
    powerDbm: asNumber(raw['power_dBm'], 'power_dBm', i),
    channel: String(raw['channel']),
    gmi: asNumber(raw['gmi_bits_per_4D'], 'gmi_bits_per_4D', i),
    nmseDb: asNumber(raw['nmse_dB'], 'nmse_dB', i),
    seed: asNumber(raw['seed'], 'seed', i),
    peakFlag: asNumber(raw['peak_flag'], 'peak_flag', i),
  }));
}

/** Full-field methods are drawn dashed, mirroring the usual figure style. */
export function isFullField(method: string): boolean {
  return method.toLowerCase().startsWith('ff');
}

/**
 * The channel-average peak rows, one point per (method, N_s), exactly as
 * they appear in the CSV (no resampling or reaveraging).
 */
export function stepsPoints(rows: MetricsRow[]): StepsPoint[] {
  const points = rows
    .filter((r) => r.channel === 'avg' && r.peakFlag === 1)
    .map((r) => ({
      method: r.method,
      nS: r.nS,
      gmi: r.gmi,
      fullField: isFullField(r.method),
    }))
    .sort((a, b) => a.method.localeCompare(b.method) || a.nS - b.nS);
  const methods = new Set(points.map((p) => p.method));
  if (methods.size < 2) {
    throw new TableError(
      `need peak rows for at least 2 methods, found ${methods.size}`,
    );
  }
  return points;
}

/**
 * The channel-average GMI curve of one (method, N_s) across launch power,
 * with the argmax point marked.
 */
export function powerPoints(rows: MetricsRow[], method: string, nS: number): PowerPoint[] {
  const curve = rows
    .filter((r) => r.channel === 'avg' && r.method === method && r.nS === nS)
    .map((r) => ({ powerDbm: r.powerDbm, gmi: r.gmi, peak: false }))
    .sort((a, b) => a.powerDbm - b.powerDbm);
  if (curve.length === 0) {
    throw new TableError(`no rows for method '${method}' with N_s=${nS}`);
  }
  let best = 0;
  curve.forEach((p, i) => {
    if (p.gmi > curve[best].gmi) best = i;
  });
  curve[best].peak = true;
  return curve;
}
