/**
 * Schema document parsing and many-hot query encoding, mirroring the
 * server's wire formats so local evaluation can build the exact same
 * query batch a dashboard refresh sends.
 */

export interface Range {
  lo: number;
  hi: number;
}

export interface GeoSelection {
  x: Range;
  y: Range;
}

export type Selection = Range | GeoSelection;

/** Per-attribute selection map; always complete (one entry per attribute). */
export type SelectionMap = Record<string, Selection>;

export interface Attribute {
  name: string;
  kind: string;
  /** 1-D bin count, or x*y cell count for geospatial. */
  groupSize: number;
  bins: number; // 1-D only
  xBins: number; // geospatial only
  yBins: number;
  labels?: string[];
  width: number; // encoded segment width
  offset: number; // segment start in the query vector
  geospatial: boolean;
}

export interface DashboardSchema {
  fingerprint: string;
  attributes: Attribute[];
  measureType: string;
  width: number;
}

interface RawAttribute {
  name: string;
  kind: string;
  bins?: number | { x_bins: number; y_bins: number };
  labels?: string[];
}

/** Parse the GET /schema document. */
export function parseSchema(doc: unknown): DashboardSchema {
  const obj = doc as {
    fingerprint?: string;
    attributes?: RawAttribute[];
    measure?: { type?: string };
  };
  if (!obj || !Array.isArray(obj.attributes) || typeof obj.fingerprint !== 'string') {
    throw new Error('schema document missing attributes or fingerprint');
  }
  const attributes: Attribute[] = [];
  let offset = 0;
  for (const raw of obj.attributes) {
    const geospatial = typeof raw.bins === 'object' && raw.bins !== null;
    let attr: Attribute;
    if (geospatial) {
      const { x_bins, y_bins } = raw.bins as { x_bins: number; y_bins: number };
      attr = {
        name: raw.name,
        kind: raw.kind,
        geospatial: true,
        xBins: x_bins,
        yBins: y_bins,
        bins: 0,
        groupSize: x_bins * y_bins,
        width: x_bins + y_bins,
        offset,
      };
    } else {
      const bins = typeof raw.bins === 'number' ? raw.bins : (raw.labels ?? []).length;
      if (bins < 1) {
        throw new Error(`attribute '${raw.name}' has no bins`);
      }
      attr = {
        name: raw.name,
        kind: raw.kind,
        geospatial: false,
        bins,
        xBins: 0,
        yBins: 0,
        groupSize: bins,
        width: bins,
        labels: raw.labels,
        offset,
      };
    }
    attributes.push(attr);
    offset += attr.width;
  }
  return {
    fingerprint: obj.fingerprint,
    attributes,
    measureType: obj.measure?.type ?? 'count',
    width: offset,
  };
}

export function isGeoSelection(sel: Selection): sel is GeoSelection {
  return (sel as GeoSelection).x !== undefined;
}

function checkRange(name: string, r: Range, m: number): void {
  if (!Number.isInteger(r.lo) || !Number.isInteger(r.hi) || r.lo < 0 || r.hi > m || r.lo >= r.hi) {
    throw new Error(`attribute '${name}': invalid range [${r.lo}, ${r.hi}) for ${m} bins`);
  }
}

/** Throw unless the selection map is complete and every range is in bounds. */
export function validateState(schema: DashboardSchema, state: SelectionMap): void {
  for (const attr of schema.attributes) {
    const sel = state[attr.name];
    if (sel === undefined) {
      throw new Error(`state is missing attribute '${attr.name}'`);
    }
    if (attr.geospatial !== isGeoSelection(sel)) {
      throw new Error(`attribute '${attr.name}': selection shape does not match its kind`);
    }
    if (isGeoSelection(sel)) {
      checkRange(attr.name, sel.x, attr.xBins);
      checkRange(attr.name, sel.y, attr.yBins);
    } else {
      checkRange(attr.name, sel, attr.bins);
    }
  }
  for (const name of Object.keys(state)) {
    if (!schema.attributes.some((a) => a.name === name)) {
      throw new Error(`state has unknown attribute '${name}'`);
    }
  }
}

/** The default state: every attribute fully selected. */
export function fullState(schema: DashboardSchema): SelectionMap {
  const state: SelectionMap = {};
  for (const attr of schema.attributes) {
    state[attr.name] = attr.geospatial
      ? { x: { lo: 0, hi: attr.xBins }, y: { lo: 0, hi: attr.yBins } }
      : { lo: 0, hi: attr.bins };
  }
  return state;
}

function fillSegment(out: Float64Array, offset: number, r: Range): void {
  for (let i = r.lo; i < r.hi; i++) {
    out[offset + i] = 1;
  }
}

/** Many-hot encoding of a full selection state. */
export function encodeState(schema: DashboardSchema, state: SelectionMap): Float64Array {
  validateState(schema, state);
  const out = new Float64Array(schema.width);
  for (const attr of schema.attributes) {
    const sel = state[attr.name];
    if (isGeoSelection(sel)) {
      fillSegment(out, attr.offset, sel.x);
      fillSegment(out, attr.offset + attr.xBins, sel.y);
    } else {
      fillSegment(out, attr.offset, sel as Range);
    }
  }
  return out;
}

/**
 * The group-by expansion for one target attribute: its selection is
 * replaced by each singleton in turn (geospatial: every cell, y-outer
 * row-major), other attributes kept as selected.
 */
export function groupByQueries(
  schema: DashboardSchema,
  state: SelectionMap,
  target: string,
): Float64Array[] {
  const attr = schema.attributes.find((a) => a.name === target);
  if (!attr) {
    throw new Error(`unknown attribute '${target}'`);
  }
  const queries: Float64Array[] = [];
  if (attr.geospatial) {
    for (let y = 0; y < attr.yBins; y++) {
      for (let x = 0; x < attr.xBins; x++) {
        const cell: SelectionMap = {
          ...state,
          [target]: { x: { lo: x, hi: x + 1 }, y: { lo: y, hi: y + 1 } },
        };
        queries.push(encodeState(schema, cell));
      }
    }
  } else {
    for (let b = 0; b < attr.bins; b++) {
      queries.push(encodeState(schema, { ...state, [target]: { lo: b, hi: b + 1 } }));
    }
  }
  return queries;
}

/** The full dashboard batch: total query first, then every attribute's
 * group-by block in schema order — identical to the server's layout. */
export function dashboardQueries(schema: DashboardSchema, state: SelectionMap): Float64Array[] {
  const batch = [encodeState(schema, state)];
  for (const attr of schema.attributes) {
    batch.push(...groupByQueries(schema, state, attr.name));
  }
  return batch;
}
