import { readFileSync, writeFileSync } from 'fs';
import { powerSpec } from './figures';
import { renderSvg } from './render';
import { parseMetricsCsv, powerPoints, TableError } from './table';

async function main(): Promise<number> {
  const [csvPath, method, nsArg, outPath] = process.argv.slice(2);
  if (!csvPath || !method || !nsArg || !outPath) {
    console.error('usage: plot_gmi_vs_power <metrics.csv> <method> <N_s> <out.svg>');
    return 2;
  }
  const nS = Number(nsArg);
  if (!Number.isInteger(nS) || nS < 1) {
    console.error(`error: N_s must be a positive integer, got '${nsArg}'`);
    return 2;
  }
  let text: string;
  try {
    text = readFileSync(csvPath, 'utf8');
  } catch (err) {
    console.error(`cannot read ${csvPath}: ${(err as Error).message}`);
    return 1;
  }
  try {
    const points = powerPoints(parseMetricsCsv(text), method, nS);
    writeFileSync(outPath, await renderSvg(powerSpec(points, method, nS)));
    const peak = points.find((p) => p.peak);
    console.log(`${outPath}: ${points.length} points, peak ${peak?.gmi} bits/4D at ${peak?.powerDbm} dBm`);
    return 0;
  } catch (err) {
    if (err instanceof TableError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

main().then((code) => {
  process.exitCode = code;
});
