import { spawnSync } from 'node:child_process';
import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { beforeAll, describe, expect, it } from 'vitest';

const DIST = join(__dirname, '..', 'dist');
const HEADER = 'method,N_s,power_dBm,channel,gmi_bits_per_4D,nmse_dB,seed,peak_flag';

const SWEEP = [
  HEADER,
  'cc-essfm,15,1.00,avg,11.25,-18.0,7,0',
  'cc-essfm,15,2.00,avg,11.46,-18.4,7,1',
  'ff-ssfm,15,1.00,avg,10.90,-16.0,7,1',
  'ff-ssfm,15,2.00,avg,10.80,-15.8,7,0',
].join('\n');

function run(script: string, args: string[]) {
  return spawnSync('node', [join(DIST, script), ...args], { encoding: 'utf8' });
}

let dir: string;
let csvPath: string;

beforeAll(() => {
  dir = mkdtempSync(join(tmpdir(), 'wdmdbp-plots-'));
  csvPath = join(dir, 'metrics.csv');
  writeFileSync(csvPath, SWEEP);
});

describe('plot_gmi_vs_steps CLI', () => {
  it('writes an SVG and exits 0', () => {
    const out = join(dir, 'steps.svg');
    const res = run('plot_gmi_vs_steps.js', [csvPath, out]);
    expect(res.stderr).toBe('');
    expect(res.status).toBe(0);
    expect(readFileSync(out, 'utf8')).toContain('<svg');
  });

  it('exits 2 on wrong arity', () => {
    const res = run('plot_gmi_vs_steps.js', [csvPath]);
    expect(res.status).toBe(2);
    expect(res.stderr).toContain('usage:');
  });

  it('exits 1 on a missing input file', () => {
    const res = run('plot_gmi_vs_steps.js', [join(dir, 'nope.csv'), join(dir, 'x.svg')]);
    expect(res.status).toBe(1);
  });

  it('exits 1 on an invalid table', () => {
    const bad = join(dir, 'bad.csv');
    writeFileSync(bad, 'a,b\n1,2');
    const res = run('plot_gmi_vs_steps.js', [bad, join(dir, 'x.svg')]);
    expect(res.status).toBe(1);
    expect(res.stderr).toContain('error:');
  });
});

describe('plot_gmi_vs_power CLI', () => {
  it('writes an SVG and exits 0', () => {
    const out = join(dir, 'power.svg');
    const res = run('plot_gmi_vs_power.js', [csvPath, 'cc-essfm', '15', out]);
    expect(res.stderr).toBe('');
    expect(res.status).toBe(0);
    expect(readFileSync(out, 'utf8')).toContain('<svg');
  });

  it('exits 2 on a non-integer step count', () => {
    const res = run('plot_gmi_vs_power.js', [csvPath, 'cc-essfm', 'abc', join(dir, 'x.svg')]);
    expect(res.status).toBe(2);
  });

  it('exits 1 when the method is absent', () => {
    const res = run('plot_gmi_vs_power.js', [csvPath, 'essfm', '15', join(dir, 'x.svg')]);
    expect(res.status).toBe(1);
    expect(res.stderr).toContain("no rows for method 'essfm'");
  });
});
