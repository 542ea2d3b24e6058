/**
 * Browser entry point: wires the store, the HTTP client, and the local
 * evaluator to plain SVG views.  All decisions about *what* to draw live
 * in views.ts; this file only walks view models and handles pointers.
 */

import { ApiClient, type LatentPointDoc, type QueryResponse } from './api';
import {
  dashboardQueries,
  parseSchema,
  type DashboardSchema,
  type Range,
  type SelectionMap,
} from './encode';
import { parsePortable, type PortableModel } from './model';
import { DashboardStore, type EvalMode } from './state';
import {
  deriveDashboard,
  deriveLatent,
  latentFrequency,
  rangesInLasso,
  SERIES_COLORS,
  type HistogramView,
  type HeatmapView,
  type LatentPointView,
} from './views';

const SVG_NS = 'http://www.w3.org/2000/svg';
const CHART_W = 360;
const CHART_H = 140;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    node.setAttribute(k, v);
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function svg(tag: string, attrs: Record<string, string | number> = {}): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) {
    node.setAttribute(k, String(v));
  }
  return node;
}

class App {
  private api!: ApiClient;
  private schema!: DashboardSchema;
  private store!: DashboardStore;
  private model: PortableModel | null = null;
  private banner!: HTMLElement;
  private chartHosts = new Map<string, HTMLElement>();
  private latentHosts = new Map<string, HTMLElement>();
  private latentSeq = new Map<string, number>();

  async start(root: HTMLElement, baseUrl: string): Promise<void> {
    this.api = new ApiClient(baseUrl);
    this.banner = el('div', { class: 'banner', hidden: '' });
    root.appendChild(this.banner);

    const schemaDoc = await this.api.schema();
    this.schema = parseSchema(schemaDoc);
    try {
      this.model = parsePortable(await this.api.model());
      if (this.model.fingerprint !== this.schema.fingerprint) {
        this.warn('served model does not match the schema; staying in server mode');
        this.model = null;
      }
    } catch (err) {
      this.warn(`portable model unavailable (${(err as Error).message}); server mode only`);
    }

    this.store = new DashboardStore(this.schema, (state, withOracle) =>
      this.runQuery(state, withOracle),
    );
    root.appendChild(this.buildToolbar());

    const grid = el('div', { class: 'grid' });
    root.appendChild(grid);
    for (const attr of this.schema.attributes) {
      const card = el('section', { class: 'card' });
      card.appendChild(el('h3', {}, attr.name));
      const host = el('div', { class: 'chart' });
      card.appendChild(host);
      this.chartHosts.set(attr.name, host);
      if (!attr.geospatial) {
        const latent = el('div', { class: 'latent' });
        card.appendChild(latent);
        this.latentHosts.set(attr.name, latent);
      }
      grid.appendChild(card);
      this.store.registerView(attr.name, () => {
        this.renderAll();
        void this.refreshLatent(attr.name);
      });
    }
    await this.store.refresh();
    this.renderAll();
    for (const name of this.latentHosts.keys()) {
      void this.refreshLatent(name);
    }
  }

  private warn(message: string): void {
    this.banner.textContent = message;
    this.banner.toggleAttribute('hidden', message === '');
  }

  private buildToolbar(): HTMLElement {
    const bar = el('div', { class: 'toolbar' });
    const mode = el('select');
    for (const m of ['server', 'local', 'compare'] as EvalMode[]) {
      const opt = el('option', { value: m }, m);
      if (m === 'local' && !this.model) {
        opt.disabled = true;
      }
      mode.appendChild(opt);
    }
    mode.addEventListener('change', () => {
      this.store.evalMode = mode.value as EvalMode;
      void this.store.refresh().then(() => this.renderAll());
    });
    bar.appendChild(el('label', {}, 'evaluation: '));
    bar.appendChild(mode);

    const oracle = el('input', { type: 'checkbox' });
    oracle.addEventListener('change', () => {
      this.store.withOracle = oracle.checked;
      void this.store.refresh().then(() => this.renderAll());
    });
    const label = el('label', {}, ' show ground truth');
    label.prepend(oracle);
    bar.appendChild(label);

    const reset = el('button', {}, 'reset selections');
    reset.addEventListener('click', () => {
      for (const attr of this.schema.attributes) {
        this.store.clearBrush(attr.name);
      }
      this.renderAll();
    });
    bar.appendChild(reset);
    return bar;
  }

  private localResponse(state: SelectionMap): QueryResponse {
    const model = this.model;
    if (!model) {
      throw new Error('no portable model loaded');
    }
    const predictions = model.predict(dashboardQueries(this.schema, state));
    const clamp = (v: number) => (this.schema.measureType === 'count' ? Math.max(v, 0) : v);
    const attributes = [];
    let at = 1;
    for (const attr of this.schema.attributes) {
      const raw = predictions.slice(at, at + attr.groupSize);
      at += attr.groupSize;
      attributes.push({
        name: attr.name,
        predictions: raw.map(clamp),
        predictions_raw: raw,
      });
    }
    return {
      schema_fingerprint: this.schema.fingerprint,
      total: clamp(predictions[0]),
      total_raw: predictions[0],
      attributes,
      latency_ms: 0,
    };
  }

  private async runQuery(state: SelectionMap, withOracle: boolean): Promise<QueryResponse> {
    if (this.store && this.store.evalMode === 'local') {
      return this.localResponse(state);
    }
    try {
      const server = await this.api.query(state, withOracle, this.schema.fingerprint);
      if (this.store && this.store.evalMode === 'compare' && this.model) {
        const local = this.localResponse(state);
        // reuse the ground-truth slot to draw local vs server deltas
        for (let i = 0; i < server.attributes.length; i++) {
          server.attributes[i].oracle = local.attributes[i].predictions;
        }
      }
      return server;
    } catch (err) {
      if (this.model) {
        this.warn(`server unreachable (${(err as Error).message}); showing local predictions`);
        this.store.evalMode = 'local';
        return this.localResponse(state);
      }
      throw err;
    }
  }

  private renderAll(): void {
    const response = this.store.response;
    if (!response) {
      return;
    }
    const derived = deriveDashboard(this.schema, this.store.state, response);
    if (derived.error) {
      this.warn(derived.error);
      return;
    }
    this.warn('');
    for (const view of derived.views) {
      const host = this.chartHosts.get(view.attribute);
      if (!host) {
        continue;
      }
      host.replaceChildren(
        view.kind === 'histogram' ? this.renderHistogram(view) : this.renderHeatmap(view),
      );
    }
  }

  private renderHistogram(view: HistogramView): SVGElement {
    const node = svg('svg', { width: CHART_W, height: CHART_H });
    const max = Math.max(...view.bars.map((b) => Math.max(b.predicted, b.observed ?? 0)), 1);
    const bw = CHART_W / view.bars.length;
    for (const bar of view.bars) {
      const h = (bar.predicted / max) * (CHART_H - 4);
      const rect = svg('rect', {
        x: bar.bin * bw + 1,
        y: CHART_H - h,
        width: Math.max(bw - 2, 1),
        height: h,
        fill: SERIES_COLORS.predicted,
        opacity: bar.inSelection ? 1 : 0.35,
      });
      node.appendChild(rect);
      if (bar.observed !== null) {
        const oh = (bar.observed / max) * (CHART_H - 4);
        node.appendChild(
          svg('rect', {
            x: bar.bin * bw + bw / 2,
            y: CHART_H - oh,
            width: Math.max(bw / 2 - 2, 1),
            height: oh,
            fill: SERIES_COLORS.observed,
            opacity: bar.inSelection ? 1 : 0.35,
          }),
        );
      }
    }
    this.wireHistogramBrush(node, view);
    return node;
  }

  private wireHistogramBrush(node: SVGElement, view: HistogramView): void {
    const bins = view.bars.length;
    let anchor: number | null = null;
    const binAt = (ev: PointerEvent) => {
      const rect = (node as unknown as Element).getBoundingClientRect();
      return ((ev.clientX - rect.left) / rect.width) * bins;
    };
    node.addEventListener('pointerdown', (ev) => {
      anchor = binAt(ev as PointerEvent);
    });
    node.addEventListener('pointerup', (ev) => {
      if (anchor === null) {
        return;
      }
      const end = binAt(ev as PointerEvent);
      const changed = this.store.brush(view.attribute, {
        lo: Math.min(anchor, end),
        hi: Math.max(anchor, end),
      });
      anchor = null;
      if (changed) {
        this.renderAll();
      }
    });
    node.addEventListener('dblclick', () => {
      if (this.store.clearBrush(view.attribute)) {
        this.renderAll();
      }
    });
  }

  private renderHeatmap(view: HeatmapView): SVGElement {
    const cw = CHART_W / view.xBins;
    const ch = CHART_H / view.yBins;
    const node = svg('svg', { width: CHART_W, height: CHART_H });
    const max = Math.max(...view.cells, 1);
    for (let y = 0; y < view.yBins; y++) {
      for (let x = 0; x < view.xBins; x++) {
        const v = view.cells[y * view.xBins + x];
        const inSel =
          x >= view.selection.x.lo &&
          x < view.selection.x.hi &&
          y >= view.selection.y.lo &&
          y < view.selection.y.hi;
        node.appendChild(
          svg('rect', {
            x: x * cw,
            y: (view.yBins - 1 - y) * ch,
            width: cw,
            height: ch,
            fill: SERIES_COLORS.predicted,
            opacity: (0.15 + 0.85 * (v / max)) * (inSel ? 1 : 0.4),
          }),
        );
      }
    }
    this.wireHeatmapBrush(node, view);
    return node;
  }

  private wireHeatmapBrush(node: SVGElement, view: HeatmapView): void {
    let anchor: { x: number; y: number } | null = null;
    const cellAt = (ev: PointerEvent) => {
      const rect = (node as unknown as Element).getBoundingClientRect();
      return {
        x: ((ev.clientX - rect.left) / rect.width) * view.xBins,
        y: (1 - (ev.clientY - rect.top) / rect.height) * view.yBins,
      };
    };
    node.addEventListener('pointerdown', (ev) => {
      anchor = cellAt(ev as PointerEvent);
    });
    node.addEventListener('pointerup', (ev) => {
      if (anchor === null) {
        return;
      }
      const end = cellAt(ev as PointerEvent);
      const changed = this.store.brush(view.attribute, {
        x: { lo: Math.min(anchor.x, end.x), hi: Math.max(anchor.x, end.x) },
        y: { lo: Math.min(anchor.y, end.y), hi: Math.max(anchor.y, end.y) },
      });
      anchor = null;
      if (changed) {
        this.renderAll();
      }
    });
    node.addEventListener('dblclick', () => {
      if (this.store.clearBrush(view.attribute)) {
        this.renderAll();
      }
    });
  }

  private async refreshLatent(attribute: string): Promise<void> {
    const host = this.latentHosts.get(attribute);
    if (!host) {
      return;
    }
    const ticket = (this.latentSeq.get(attribute) ?? 0) + 1;
    this.latentSeq.set(attribute, ticket);
    let points: LatentPointDoc[];
    try {
      points = (await this.api.latent(attribute, this.store.state)).points;
    } catch {
      return; // latent view is best-effort; the histogram already shows state
    }
    if (this.latentSeq.get(attribute) !== ticket) {
      return;
    }
    const current = this.store.selection(attribute) as Range;
    const lasso = this.store.latentSelection.get(attribute) ?? [];
    host.replaceChildren(this.renderLatent(attribute, deriveLatent(points, current, lasso)));
  }

  private renderLatent(attribute: string, points: LatentPointView[]): SVGElement {
    const node = svg('svg', { width: CHART_W, height: CHART_H, class: 'latent-plot' });
    const xs = points.map((p) => p.x);
    const ys = points.map((p) => p.y);
    const xLo = Math.min(...xs);
    const xHi = Math.max(...xs);
    const yLo = Math.min(...ys);
    const yHi = Math.max(...ys);
    const sx = (x: number) => ((x - xLo) / (xHi - xLo || 1)) * (CHART_W - 20) + 10;
    const sy = (y: number) => CHART_H - (((y - yLo) / (yHi - yLo || 1)) * (CHART_H - 20) + 10);
    const maxLen = Math.max(...points.map((p) => p.length), 1);
    for (const p of points) {
      const circle = svg('circle', {
        cx: sx(p.x),
        cy: sy(p.y),
        r: Math.max(p.radius, 1.5),
        fill: `hsl(${30 + 180 * (p.length / maxLen)}, 70%, 55%)`,
        stroke: p.highlight === 'selected' ? '#000' : p.highlight === 'same-length' ? '#666' : 'none',
        'stroke-width': p.highlight === 'selected' ? 2.5 : p.highlight === 'same-length' ? 1.2 : 0,
        opacity: p.inLasso || p.highlight ? 1 : 0.7,
      });
      node.appendChild(circle);
    }
    this.wireLasso(node, attribute, points, { sx, sy });
    return node;
  }

  private wireLasso(
    node: SVGElement,
    attribute: string,
    points: LatentPointView[],
    scale: { sx: (x: number) => number; sy: (y: number) => number },
  ): void {
    let anchor: { x: number; y: number } | null = null;
    const at = (ev: PointerEvent) => {
      const rect = (node as unknown as Element).getBoundingClientRect();
      return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
    };
    node.addEventListener('pointerdown', (ev) => {
      if ((ev as PointerEvent).shiftKey) {
        anchor = at(ev as PointerEvent);
      }
    });
    node.addEventListener('pointerup', (ev) => {
      if (anchor === null) {
        return;
      }
      const end = at(ev as PointerEvent);
      const screen = points.map((p) => ({ ...p, x: scale.sx(p.x), y: scale.sy(p.y) }));
      const ranges = rangesInLasso(screen, {
        x0: anchor.x,
        x1: end.x,
        y0: anchor.y,
        y1: end.y,
      });
      anchor = null;
      this.store.setLatentSelection(attribute, ranges);
      this.renderFrequency(attribute, ranges);
    });
  }

  private renderFrequency(attribute: string, ranges: Range[]): void {
    const host = this.latentHosts.get(attribute);
    const attr = this.schema.attributes.find((a) => a.name === attribute);
    if (!host || !attr) {
      return;
    }
    const prior = host.querySelector('.frequency');
    prior?.remove();
    if (ranges.length === 0) {
      return;
    }
    const counts = latentFrequency(ranges, attr.bins);
    const wrap = el('div', { class: 'frequency' });
    const node = svg('svg', { width: CHART_W, height: 60 });
    const max = Math.max(...counts, 1);
    const bw = CHART_W / counts.length;
    counts.forEach((c, bin) => {
      const h = (c / max) * 56;
      node.appendChild(
        svg('rect', {
          x: bin * bw + 1,
          y: 60 - h,
          width: Math.max(bw - 2, 1),
          height: h,
          fill: SERIES_COLORS.observed,
        }),
      );
    });
    wrap.appendChild(node);
    host.appendChild(wrap);
  }
}

const rootEl = typeof document !== 'undefined' ? document.getElementById('app') : null;
if (rootEl) {
  const base = new URLSearchParams(window.location.search).get('api') ?? 'http://127.0.0.1:8000';
  void new App().start(rootEl, base);
}

export { App };
