import type { TopLevelSpec } from 'vega-lite';
import type { PowerPoint, StepsPoint } from './table';

const WIDTH = 560;
const HEIGHT = 360;

/**
 * Peak GMI versus number of DBP steps: log-scaled N_s axis, one labeled
 * series per method, dashed lines for full-field methods.  The vega-lite
 * spec carries the points inline, so what is rendered is exactly what was
 * parsed.
 */
export function stepsSpec(points: StepsPoint[]): TopLevelSpec {
  return {
    width: WIDTH,
    height: HEIGHT,
    data: { values: points },
    mark: { type: 'line', point: true },
    encoding: {
      x: {
        field: 'nS',
        type: 'quantitative',
        scale: { type: 'log' },
        axis: { title: 'DBP steps N_s', grid: true },
      },
      y: {
        field: 'gmi',
        type: 'quantitative',
        scale: { zero: false },
        axis: { title: 'peak GMI [bits/4D]', grid: true },
      },
      color: { field: 'method', type: 'nominal', legend: { title: 'method' } },
      strokeDash: {
        field: 'fullField',
        type: 'nominal',
        legend: null,
        scale: { domain: [false, true], range: [[1, 0], [6, 4]] },
      },
    },
  };
}

/**
 * GMI versus launch power for one (method, N_s), the argmax marked with a
 * filled diamond.
 */
export function powerSpec(points: PowerPoint[], method: string, nS: number): TopLevelSpec {
  return {
    width: WIDTH,
    height: HEIGHT,
    title: `${method}, N_s = ${nS}`,
    layer: [
      {
        data: { values: points },
        mark: { type: 'line', point: true },
        encoding: {
          x: {
            field: 'powerDbm',
            type: 'quantitative',
            axis: { title: 'launch power [dBm]', grid: true },
          },
          y: {
            field: 'gmi',
            type: 'quantitative',
            scale: { zero: false },
            axis: { title: 'GMI [bits/4D]', grid: true },
          },
        },
      },
      {
        data: { values: points.filter((p) => p.peak) },
        mark: { type: 'point', shape: 'diamond', size: 180, filled: true, color: '#d62728' },
        encoding: {
          x: { field: 'powerDbm', type: 'quantitative' },
          y: { field: 'gmi', type: 'quantitative' },
        },
      },
    ],
  };
}
