/**
 * The dashboard's single source of truth: a complete, always-valid
 * selection state plus the latest query response.
 *
 * Contract: a brush on one attribute re-queries the server (or local
 * evaluator) once and then refreshes every view belonging to *other*
 * attributes exactly once.  Identical brushes deduplicate to nothing.
 * Responses apply latest-wins: a stale in-flight answer is dropped.
 */

import type { QueryResponse } from './api';
import type { DashboardSchema, Range, Selection, SelectionMap } from './encode';
import { fullState, isGeoSelection, validateState } from './encode';

export type EvalMode = 'local' | 'server' | 'compare';

export type QueryRunner = (state: SelectionMap, withOracle: boolean) => Promise<QueryResponse>;

export type RefreshListener = (response: QueryResponse) => void;

interface ViewRegistration {
  attribute: string;
  listener: RefreshListener;
}

function clampRange(r: Range, m: number): Range | null {
  let { lo, hi } = r;
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) {
    return null;
  }
  if (lo > hi) {
    [lo, hi] = [hi, lo];
  }
  lo = Math.max(0, Math.min(m - 1, Math.floor(lo)));
  hi = Math.max(lo + 1, Math.min(m, Math.ceil(hi)));
  if (hi <= lo) {
    return null;
  }
  return { lo, hi };
}

function sameSelection(a: Selection, b: Selection): boolean {
  if (isGeoSelection(a) && isGeoSelection(b)) {
    return (
      a.x.lo === b.x.lo && a.x.hi === b.x.hi && a.y.lo === b.y.lo && a.y.hi === b.y.hi
    );
  }
  if (!isGeoSelection(a) && !isGeoSelection(b)) {
    return a.lo === b.lo && a.hi === b.hi;
  }
  return false;
}

export class DashboardStore {
  readonly schema: DashboardSchema;
  private selections: SelectionMap;
  private views: ViewRegistration[] = [];
  private seq = 0;
  private applied = 0;
  response: QueryResponse | null = null;
  evalMode: EvalMode = 'server';
  withOracle = false;
  /** Per-attribute latent lasso selection, as the covered ranges. */
  readonly latentSelection = new Map<string, Range[]>();

  constructor(
    schema: DashboardSchema,
    private readonly runQuery: QueryRunner,
  ) {
    this.schema = schema;
    this.selections = fullState(schema);
  }

  /** A defensive copy of the current complete selection state. */
  get state(): SelectionMap {
    const copy: SelectionMap = {};
    for (const [name, sel] of Object.entries(this.selections)) {
      copy[name] = isGeoSelection(sel)
        ? { x: { ...sel.x }, y: { ...sel.y } }
        : { ...sel };
    }
    return copy;
  }

  selection(attribute: string): Selection {
    const sel = this.selections[attribute];
    if (sel === undefined) {
      throw new Error(`unknown attribute '${attribute}'`);
    }
    return sel;
  }

  /** Register a view; it is refreshed whenever another attribute changes. */
  registerView(attribute: string, listener: RefreshListener): () => void {
    const reg = { attribute, listener };
    this.views.push(reg);
    return () => {
      this.views = this.views.filter((v) => v !== reg);
    };
  }

  /**
   * Apply a brush.  Inputs are clamped into bounds (inverted drags are
   * swapped, fractional pixels floored/ceiled outward); unrepresentable
   * or identical selections are dropped and trigger nothing.
   */
  brush(attribute: string, selection: Selection): boolean {
    const attr = this.schema.attributes.find((a) => a.name === attribute);
    if (!attr) {
      return false;
    }
    let next: Selection | null;
    if (attr.geospatial) {
      if (!isGeoSelection(selection)) {
        return false;
      }
      const x = clampRange(selection.x, attr.xBins);
      const y = clampRange(selection.y, attr.yBins);
      next = x && y ? { x, y } : null;
    } else {
      next = isGeoSelection(selection) ? null : clampRange(selection, attr.bins);
    }
    if (next === null || sameSelection(this.selections[attribute], next)) {
      return false;
    }
    this.selections = { ...this.selections, [attribute]: next };
    validateState(this.schema, this.selections);
    void this.refresh(attribute);
    return true;
  }

  /** Restore an attribute to its full range. */
  clearBrush(attribute: string): boolean {
    const attr = this.schema.attributes.find((a) => a.name === attribute);
    if (!attr) {
      return false;
    }
    const full: Selection = attr.geospatial
      ? { x: { lo: 0, hi: attr.xBins }, y: { lo: 0, hi: attr.yBins } }
      : { lo: 0, hi: attr.bins };
    if (sameSelection(this.selections[attribute], full)) {
      return false;
    }
    this.selections = { ...this.selections, [attribute]: full };
    void this.refresh(attribute);
    return true;
  }

  setLatentSelection(attribute: string, ranges: Range[]): void {
    if (ranges.length === 0) {
      this.latentSelection.delete(attribute);
    } else {
      this.latentSelection.set(attribute, ranges.map((r) => ({ ...r })));
    }
  }

  /**
   * Issue one dashboard query for the current state.  Only the newest
   * response is ever applied; each applied response notifies every view
   * except those of the attribute that caused the refresh.
   */
  async refresh(source?: string): Promise<void> {
    const ticket = ++this.seq;
    let response: QueryResponse;
    try {
      response = await this.runQuery(this.state, this.withOracle);
    } catch (err) {
      if ((err as Error).name === 'AbortError') {
        return;
      }
      throw err;
    }
    if (ticket <= this.applied) {
      return; // a newer response already landed
    }
    this.applied = ticket;
    this.response = response;
    for (const view of this.views) {
      if (view.attribute !== source) {
        view.listener(response);
      }
    }
  }
}
