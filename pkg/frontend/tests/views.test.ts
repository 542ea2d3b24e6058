import { describe, expect, it } from 'vitest';

import type { LatentPointDoc, QueryResponse } from '../src/api';
import { fullState, parseSchema, type DashboardSchema } from '../src/encode';
import {
  deriveDashboard,
  deriveLatent,
  latentFrequency,
  rangesInLasso,
  SERIES_COLORS,
  type HeatmapView,
  type HistogramView,
} from '../src/views';

function testSchema(): DashboardSchema {
  return parseSchema({
    schema_version: 1,
    fingerprint: 'fp-test',
    attributes: [
      { name: 'hour', kind: 'temporal-cyclic', bins: 4 },
      { name: 'loc', kind: 'geospatial-2d', bins: { x_bins: 3, y_bins: 2 } },
    ],
    measure: { type: 'count' },
  });
}

function okResponse(schema: DashboardSchema, withOracle = false): QueryResponse {
  return {
    schema_fingerprint: schema.fingerprint,
    total: 100,
    total_raw: 100,
    oracle_total: withOracle ? 90 : undefined,
    attributes: schema.attributes.map((a) => ({
      name: a.name,
      predictions: Array.from({ length: a.groupSize }, (_, i) => i + 1),
      predictions_raw: Array.from({ length: a.groupSize }, (_, i) => i + 1),
      ...(withOracle
        ? { oracle: Array.from({ length: a.groupSize }, (_, i) => 2 * i) }
        : {}),
    })),
    latency_ms: 1,
  };
}

describe('dashboard view derivation', () => {
  it('builds one view per attribute with selection flags', () => {
    const schema = testSchema();
    const state = fullState(schema);
    state.hour = { lo: 1, hi: 3 };
    const derived = deriveDashboard(schema, state, okResponse(schema));
    expect(derived.error).toBeNull();
    expect(derived.total).toBe(100);
    expect(derived.views.length).toBe(2);

    const hist = derived.views[0] as HistogramView;
    expect(hist.kind).toBe('histogram');
    expect(hist.bars.map((b) => b.predicted)).toEqual([1, 2, 3, 4]);
    expect(hist.bars.map((b) => b.inSelection)).toEqual([false, true, true, false]);
    expect(hist.hasObserved).toBe(false);
    expect(hist.bars.every((b) => b.observed === null)).toBe(true);

    const heat = derived.views[1] as HeatmapView;
    expect(heat.kind).toBe('heatmap');
    expect(heat.xBins).toBe(3);
    expect(heat.yBins).toBe(2);
    // y-outer row-major: cell (x=2, y=1) is the last entry
    expect(heat.cells[1 * 3 + 2]).toBe(6);
  });

  it('carries the observed series when the oracle is present', () => {
    const schema = testSchema();
    const derived = deriveDashboard(schema, fullState(schema), okResponse(schema, true));
    const hist = derived.views[0] as HistogramView;
    expect(hist.hasObserved).toBe(true);
    expect(hist.bars.map((b) => b.observed)).toEqual([0, 2, 4, 6]);
    expect(derived.oracleTotal).toBe(90);
    expect((derived.views[1] as HeatmapView).observed).toEqual([0, 2, 4, 6, 8, 10]);
  });

  it('reports an error and builds no views on attribute-count mismatch', () => {
    const schema = testSchema();
    const response = okResponse(schema);
    response.attributes = response.attributes.slice(0, 1);
    const derived = deriveDashboard(schema, fullState(schema), response);
    expect(derived.error).toMatch(/attribute blocks/);
    expect(derived.views).toEqual([]);
  });

  it('reports an error and builds no views on block-length mismatch', () => {
    const schema = testSchema();
    const response = okResponse(schema);
    response.attributes[1].predictions = [1, 2, 3];
    const derived = deriveDashboard(schema, fullState(schema), response);
    expect(derived.error).toMatch(/expects 6 values/);
    expect(derived.views).toEqual([]); // no partial render of the valid block
  });

  it('renders nulls (non-finite on the server) as zero-height bars', () => {
    const schema = testSchema();
    const response = okResponse(schema);
    response.attributes[0].predictions = [null, 2, null, 4];
    const hist = deriveDashboard(schema, fullState(schema), response).views[0] as HistogramView;
    expect(hist.bars.map((b) => b.predicted)).toEqual([0, 2, 0, 4]);
  });

  it('uses orange for predictions and blue for observations', () => {
    expect(SERIES_COLORS.predicted.toLowerCase()).toBe('#e6883c');
    expect(SERIES_COLORS.observed.toLowerCase()).toBe('#3c78c8');
    expect(SERIES_COLORS.predicted).not.toBe(SERIES_COLORS.observed);
  });
});

function latentPoints(bins: number): LatentPointDoc[] {
  const points: LatentPointDoc[] = [];
  for (let length = 1; length <= bins; length++) {
    for (let lo = 0; lo + length <= bins; lo++) {
      points.push({
        lo,
        hi: lo + length,
        x: lo + length / 10,
        y: length,
        value: length * 10,
        value_raw: length * 10,
        length,
      });
    }
  }
  return points;
}

describe('latent view derivation', () => {
  it('marks the current range selected and equal lengths as same-length', () => {
    const views = deriveLatent(latentPoints(4), { lo: 1, hi: 3 });
    const selected = views.filter((v) => v.highlight === 'selected');
    expect(selected.length).toBe(1);
    expect(selected[0]).toMatchObject({ lo: 1, hi: 3 });
    const same = views.filter((v) => v.highlight === 'same-length');
    expect(same.map((v) => [v.lo, v.hi])).toEqual([
      [0, 2],
      [2, 4],
    ]);
  });

  it('scales point area (radius squared) with the predicted value', () => {
    const views = deriveLatent(latentPoints(4), null, [], 10);
    const vmax = Math.max(...views.map((v) => v.value));
    for (const v of views) {
      expect(v.radius).toBeCloseTo(10 * Math.sqrt(v.value / vmax), 12);
    }
    // all-zero (or clamped-negative) values draw nothing rather than NaN
    const zeros = deriveLatent(
      [
        { lo: 0, hi: 1, x: 0, y: 0, value: 0, value_raw: 0, length: 1 },
        { lo: 1, hi: 2, x: 1, y: 0, value: null, value_raw: null, length: 1 },
      ],
      null,
    );
    expect(zeros.map((v) => v.radius)).toEqual([0, 0]);
  });

  it('flags points inside the lasso and maps them back to ranges', () => {
    const views = deriveLatent(latentPoints(3), null);
    // lasso around the two length-1 points at x=1.1 and x=2.1 (y=1)
    const rect = { x0: 2.2, x1: 1.0, y0: 1.5, y1: 0.5 };
    const ranges = rangesInLasso(views, rect);
    expect(ranges).toEqual([
      { lo: 1, hi: 2 },
      { lo: 2, hi: 3 },
    ]);
    const flagged = deriveLatent(latentPoints(3), null, ranges);
    expect(flagged.filter((v) => v.inLasso).map((v) => [v.lo, v.hi])).toEqual([
      [1, 2],
      [2, 3],
    ]);
  });

  it('computes bin coverage frequency for lassoed ranges', () => {
    // every range of a 3-bin attribute covers bin j (j+1)(3-j) times
    const all = latentPoints(3).map((p) => ({ lo: p.lo, hi: p.hi }));
    expect(all.length).toBe(6);
    expect(latentFrequency(all, 3)).toEqual([3, 4, 3]);
    expect(latentFrequency([{ lo: 2, hi: 5 }], 6)).toEqual([0, 0, 1, 1, 1, 0]);
    expect(latentFrequency([], 4)).toEqual([0, 0, 0, 0]);
  });
});
