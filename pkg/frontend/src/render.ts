import type { TopLevelSpec } from 'vega-lite';

/**
 * Render a vega-lite spec to an SVG string, fully headless (no DOM).
 *
 * vega 6 ships as ES modules with top-level await, so it cannot be loaded
 * with require(); the dynamic import() below works from CommonJS and is
 * left untransformed by the NodeNext module setting.
 */
export async function renderSvg(spec: TopLevelSpec): Promise<string> {
  const vega = await import('vega');
  const { compile } = await import('vega-lite');
  const runtime = vega.parse(compile(spec).spec);
  const view = new vega.View(runtime, { renderer: 'none' });
  try {
    return await view.toSVG();
  } finally {
    view.finalize();
  }
}
