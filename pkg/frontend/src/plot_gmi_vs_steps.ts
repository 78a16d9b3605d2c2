import { readFileSync, writeFileSync } from 'fs';
import { stepsSpec } from './figures';
import { renderSvg } from './render';
import { parseMetricsCsv, stepsPoints, TableError } from './table';

async function main(): Promise<number> {
  const [csvPath, outPath] = process.argv.slice(2);
  if (!csvPath || !outPath) {
    console.error('usage: plot_gmi_vs_steps <metrics.csv> <out.svg>');
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
    const points = stepsPoints(parseMetricsCsv(text));
    writeFileSync(outPath, await renderSvg(stepsSpec(points)));
    const methods = new Set(points.map((p) => p.method));
    console.log(`${outPath}: ${points.length} peak points, ${methods.size} methods`);
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
