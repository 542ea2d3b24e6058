import { describe, expect, it } from 'vitest';

import type { QueryResponse } from '../src/api';
import {
  parseSchema,
  validateState,
  type DashboardSchema,
  type Range,
  type SelectionMap,
} from '../src/encode';
import { DashboardStore } from '../src/state';

function testSchema(): DashboardSchema {
  return parseSchema({
    schema_version: 1,
    fingerprint: 'fp-test',
    attributes: [
      { name: 'hour', kind: 'temporal-cyclic', bins: 6 },
      { name: 'kind', kind: 'categorical', labels: ['a', 'b', 'c'] },
      { name: 'loc', kind: 'geospatial-2d', bins: { x_bins: 4, y_bins: 4 } },
    ],
    measure: { type: 'count' },
  });
}

function makeResponse(schema: DashboardSchema, marker: number): QueryResponse {
  return {
    schema_fingerprint: schema.fingerprint,
    total: marker,
    total_raw: marker,
    attributes: schema.attributes.map((a) => ({
      name: a.name,
      predictions: new Array<number>(a.groupSize).fill(marker),
      predictions_raw: new Array<number>(a.groupSize).fill(marker),
    })),
    latency_ms: 0,
  };
}

/** Store wired to an instant fake server that records every request. */
function instantStore() {
  const schema = testSchema();
  const calls: SelectionMap[] = [];
  const store = new DashboardStore(schema, (state) => {
    calls.push(state);
    return Promise.resolve(makeResponse(schema, calls.length));
  });
  return { schema, store, calls };
}

const tick = () => new Promise<void>((resolve) => setTimeout(resolve, 0));

describe('brushing', () => {
  it('refreshes every other view exactly once, never the source view', async () => {
    const { store } = instantStore();
    const counts: Record<string, number> = { hour: 0, kind: 0, loc: 0 };
    for (const name of Object.keys(counts)) {
      store.registerView(name, () => {
        counts[name] += 1;
      });
    }
    expect(store.brush('hour', { lo: 1, hi: 3 })).toBe(true);
    await tick();
    expect(counts).toEqual({ hour: 0, kind: 1, loc: 1 });
  });

  it('deduplicates identical brushes without issuing a second request', () => {
    const { store, calls } = instantStore();
    expect(store.brush('kind', { lo: 0, hi: 2 })).toBe(true);
    expect(calls.length).toBe(1);
    expect(store.brush('kind', { lo: 0, hi: 2 })).toBe(false);
    expect(calls.length).toBe(1);
  });

  it('clamps inverted and fractional drags to valid bin ranges', () => {
    const { store } = instantStore();
    expect(store.brush('hour', { lo: 4.6, hi: 1.2 })).toBe(true);
    expect(store.selection('hour')).toEqual({ lo: 1, hi: 5 });
  });

  it('clamps drags that overshoot the domain', () => {
    const { store } = instantStore();
    expect(store.brush('hour', { lo: 2, hi: 3 })).toBe(true);
    expect(store.brush('hour', { lo: -10, hi: 99 })).toBe(true);
    expect(store.selection('hour')).toEqual({ lo: 0, hi: 6 });
  });

  it('drops non-finite drags entirely', () => {
    const { store, calls } = instantStore();
    expect(store.brush('hour', { lo: Number.NaN, hi: 3 })).toBe(false);
    expect(store.brush('hour', { lo: 0, hi: Number.POSITIVE_INFINITY })).toBe(false);
    expect(calls.length).toBe(0);
  });

  it('brushes geospatial attributes on both axes', () => {
    const { store } = instantStore();
    const sel = { x: { lo: 0.2, hi: 1.8 }, y: { lo: 3.9, hi: 2.1 } };
    expect(store.brush('loc', sel)).toBe(true);
    expect(store.selection('loc')).toEqual({ x: { lo: 0, hi: 2 }, y: { lo: 2, hi: 4 } });
  });

  it('rejects a 1-D selection applied to a geospatial attribute', () => {
    const { store, calls } = instantStore();
    expect(store.brush('loc', { lo: 0, hi: 1 })).toBe(false);
    expect(store.brush('nope', { lo: 0, hi: 1 })).toBe(false);
    expect(calls.length).toBe(0);
  });

  it('clearBrush restores the full range; clearing a full range is a no-op', () => {
    const { store, calls } = instantStore();
    store.brush('hour', { lo: 1, hi: 2 });
    expect(store.clearBrush('hour')).toBe(true);
    expect(store.selection('hour')).toEqual({ lo: 0, hi: 6 });
    const before = calls.length;
    expect(store.clearBrush('hour')).toBe(false);
    expect(calls.length).toBe(before);
  });

  it('state getter returns copies; mutating them cannot corrupt the store', () => {
    const { schema, store } = instantStore();
    const snapshot = store.state;
    (snapshot.hour as Range).lo = 99;
    validateState(schema, store.state);
    expect(store.selection('hour')).toEqual({ lo: 0, hi: 6 });
  });
});

describe('state validity under fuzzing', () => {
  it('300 random drags always leave a complete valid state', () => {
    const { schema, store, calls } = instantStore();
    let seed = 1234;
    const rand = () => {
      // LCG is plenty for fuzz coordinates
      seed = (seed * 1664525 + 1013904223) >>> 0;
      return seed / 2 ** 32;
    };
    const coord = (m: number) => {
      const r = rand();
      if (r < 0.05) {
        return Number.NaN;
      }
      return r * (m + 6) - 3; // overshoot both ends
    };
    for (let i = 0; i < 300; i++) {
      const attr = schema.attributes[Math.floor(rand() * schema.attributes.length)];
      const before = calls.length;
      const changed = attr.geospatial
        ? store.brush(attr.name, {
            x: { lo: coord(attr.xBins), hi: coord(attr.xBins) },
            y: { lo: coord(attr.yBins), hi: coord(attr.yBins) },
          })
        : store.brush(attr.name, { lo: coord(attr.bins), hi: coord(attr.bins) });
      expect(() => validateState(schema, store.state)).not.toThrow();
      expect(calls.length).toBe(before + (changed ? 1 : 0));
    }
    expect(calls.length).toBeGreaterThan(50); // the fuzz actually exercised requests
  });
});

describe('response application', () => {
  it('applies only the latest response when requests resolve out of order', async () => {
    const schema = testSchema();
    const resolvers: ((r: QueryResponse) => void)[] = [];
    const store = new DashboardStore(
      schema,
      () => new Promise<QueryResponse>((resolve) => resolvers.push(resolve)),
    );
    let notified = 0;
    store.registerView('hour', () => {
      notified += 1;
    });
    const first = store.refresh();
    const second = store.refresh();
    expect(resolvers.length).toBe(2);

    resolvers[1](makeResponse(schema, 2)); // newest answer lands first
    await second;
    expect(store.response?.total).toBe(2);

    resolvers[0](makeResponse(schema, 1)); // stale answer must be dropped
    await first;
    expect(store.response?.total).toBe(2);
    expect(notified).toBe(1);
  });

  it('swallows aborted requests and propagates real failures', async () => {
    const schema = testSchema();
    let fail: 'abort' | 'boom' = 'abort';
    const store = new DashboardStore(schema, () => {
      const err = new Error(fail);
      err.name = fail === 'abort' ? 'AbortError' : 'TypeError';
      return Promise.reject(err);
    });
    await store.refresh();
    expect(store.response).toBeNull();
    fail = 'boom';
    await expect(store.refresh()).rejects.toThrow('boom');
  });

  it('unsubscribed views stop receiving refreshes', async () => {
    const { store } = instantStore();
    let seen = 0;
    const off = store.registerView('kind', () => {
      seen += 1;
    });
    store.brush('hour', { lo: 0, hi: 1 });
    await tick();
    off();
    store.brush('hour', { lo: 1, hi: 2 });
    await tick();
    expect(seen).toBe(1);
  });
});

describe('latent lasso selection', () => {
  it('stores defensive copies and clears on empty', () => {
    const { store } = instantStore();
    const ranges: Range[] = [{ lo: 1, hi: 3 }];
    store.setLatentSelection('hour', ranges);
    ranges[0].lo = 99;
    expect(store.latentSelection.get('hour')).toEqual([{ lo: 1, hi: 3 }]);
    store.setLatentSelection('hour', []);
    expect(store.latentSelection.has('hour')).toBe(false);
  });
});
