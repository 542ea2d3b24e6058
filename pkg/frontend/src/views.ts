/**
 * Pure view derivations: (schema, state, response) in, plain view models
 * out.  Rendering is a dumb walk over these structures, so everything
 * visual is testable without a DOM.
 */

import type { AttributeBlock, LatentPointDoc, QueryResponse } from './api';
import type { Attribute, DashboardSchema, Range, Selection, SelectionMap } from './encode';

/** Series colors: predictions in orange, ground truth in blue. */
export const SERIES_COLORS = { predicted: '#e6883c', observed: '#3c78c8' } as const;

export interface HistogramBar {
  bin: number;
  label: string;
  predicted: number;
  observed: number | null;
  inSelection: boolean;
}

export interface HistogramView {
  kind: 'histogram';
  attribute: string;
  bars: HistogramBar[];
  selection: Range;
  hasObserved: boolean;
}

export interface HeatmapView {
  kind: 'heatmap';
  attribute: string;
  xBins: number;
  yBins: number;
  /** Row-major, y-outer: cells[y * xBins + x]. */
  cells: number[];
  observed: number[] | null;
  selection: { x: Range; y: Range };
}

export type AttributeView = HistogramView | HeatmapView;

export interface DashboardViews {
  views: AttributeView[];
  total: number | null;
  oracleTotal: number | null;
  /** Set when the response does not fit the schema; no views are built. */
  error: string | null;
}

function asNumbers(values: (number | null)[]): number[] {
  return values.map((v) => (v === null ? 0 : v));
}

function buildHistogram(attr: Attribute, sel: Selection, block: AttributeBlock): HistogramView {
  const range = sel as Range;
  const bars = block.predictions.map((p, bin) => ({
    bin,
    label: attr.labels ? attr.labels[bin] : String(bin),
    predicted: p ?? 0,
    observed: block.oracle ? (block.oracle[bin] ?? 0) : null,
    inSelection: bin >= range.lo && bin < range.hi,
  }));
  return {
    kind: 'histogram',
    attribute: attr.name,
    bars,
    selection: { ...range },
    hasObserved: block.oracle !== undefined,
  };
}

function buildHeatmap(attr: Attribute, sel: Selection, block: AttributeBlock): HeatmapView {
  const geo = sel as { x: Range; y: Range };
  return {
    kind: 'heatmap',
    attribute: attr.name,
    xBins: attr.xBins,
    yBins: attr.yBins,
    cells: asNumbers(block.predictions),
    observed: block.oracle ? asNumbers(block.oracle) : null,
    selection: { x: { ...geo.x }, y: { ...geo.y } },
  };
}

/**
 * All attribute views for one response, or an error banner and no views
 * at all when any vector length disagrees with the schema.
 */
export function deriveDashboard(
  schema: DashboardSchema,
  state: SelectionMap,
  response: QueryResponse,
): DashboardViews {
  if (response.attributes.length !== schema.attributes.length) {
    return {
      views: [],
      total: null,
      oracleTotal: null,
      error:
        `response has ${response.attributes.length} attribute blocks, ` +
        `schema defines ${schema.attributes.length}`,
    };
  }
  for (let i = 0; i < schema.attributes.length; i++) {
    const attr = schema.attributes[i];
    const block = response.attributes[i];
    if (block.predictions.length !== attr.groupSize) {
      return {
        views: [],
        total: null,
        oracleTotal: null,
        error:
          `attribute '${attr.name}' expects ${attr.groupSize} values, ` +
          `response carries ${block.predictions.length}`,
      };
    }
  }
  const views = schema.attributes.map((attr, i) => {
    const block = response.attributes[i];
    const sel = state[attr.name];
    return attr.geospatial ? buildHeatmap(attr, sel, block) : buildHistogram(attr, sel, block);
  });
  return {
    views,
    total: response.total,
    oracleTotal: response.oracle_total ?? null,
    error: null,
  };
}

export type Highlight = 'selected' | 'same-length' | null;

export interface LatentPointView {
  lo: number;
  hi: number;
  length: number;
  x: number;
  y: number;
  /** Radius scaled so point area is proportional to the predicted value. */
  radius: number;
  value: number;
  highlight: Highlight;
  inLasso: boolean;
}

/**
 * Scatter view of one attribute's range space.  The point matching the
 * current selection is marked 'selected'; every other point of the same
 * range length is marked 'same-length'.
 */
export function deriveLatent(
  points: LatentPointDoc[],
  current: Range | null,
  lasso: Range[] = [],
  maxRadius = 12,
): LatentPointView[] {
  const values = points.map((p) => Math.max(p.value ?? 0, 0));
  const vmax = Math.max(...values, 0);
  const lassoKeys = new Set(lasso.map((r) => `${r.lo}:${r.hi}`));
  return points.map((p, i) => {
    let highlight: Highlight = null;
    if (current) {
      if (p.lo === current.lo && p.hi === current.hi) {
        highlight = 'selected';
      } else if (p.hi - p.lo === current.hi - current.lo) {
        highlight = 'same-length';
      }
    }
    return {
      lo: p.lo,
      hi: p.hi,
      length: p.length,
      x: p.x ?? 0,
      y: p.y ?? 0,
      radius: vmax > 0 ? maxRadius * Math.sqrt(values[i] / vmax) : 0,
      value: p.value ?? 0,
      highlight,
      inLasso: lassoKeys.has(`${p.lo}:${p.hi}`),
    };
  });
}

/** Axis-aligned lasso region in latent coordinates. */
export interface LassoRect {
  x0: number;
  x1: number;
  y0: number;
  y1: number;
}

/** The ranges whose latent points fall inside the lasso region. */
export function rangesInLasso(points: LatentPointView[], rect: LassoRect): Range[] {
  const xLo = Math.min(rect.x0, rect.x1);
  const xHi = Math.max(rect.x0, rect.x1);
  const yLo = Math.min(rect.y0, rect.y1);
  const yHi = Math.max(rect.y0, rect.y1);
  return points
    .filter((p) => p.x >= xLo && p.x <= xHi && p.y >= yLo && p.y <= yHi)
    .map((p) => ({ lo: p.lo, hi: p.hi }));
}

/**
 * How often each bin is covered by the lassoed ranges.  A lasso over all
 * ranges of an m-bin attribute yields (j+1)(m-j) at bin j.
 */
export function latentFrequency(ranges: Range[], bins: number): number[] {
  const counts = new Array<number>(bins).fill(0);
  for (const r of ranges) {
    for (let b = r.lo; b < r.hi && b < bins; b++) {
      counts[b] += 1;
    }
  }
  return counts;
}
