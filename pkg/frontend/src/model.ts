/**
 * In-browser forward pass for the portable model JSON served at GET /model.
 *
 * Only the layers up to each attribute's embedding are evaluated for
 * prediction (the decoder half of a tower exists for training, not
 * inference); the shared regressor consumes the concatenated embeddings
 * and the scalar output is multiplied by the stored target scale, exactly
 * mirroring the server.
 */

export type Activation = 'relu' | 'sigmoid' | 'identity';

export interface LayerDoc {
  rows: number;
  cols: number;
  activation: Activation;
  w: number[];
  b: number[];
}

export interface PortableAttribute {
  name: string;
  layers: LayerDoc[];
  embedding_index: number;
}

export interface PortableDoc {
  format: string;
  version: number;
  schema_fingerprint: string;
  target_scale: number;
  attributes: PortableAttribute[];
  regressor: LayerDoc[];
}

const PORTABLE_FORMAT = 'neurocube-portable';

class Layer {
  readonly rows: number;
  readonly cols: number;
  readonly activation: Activation;
  private readonly w: Float64Array;
  private readonly b: Float64Array;

  constructor(doc: LayerDoc) {
    if (doc.w.length !== doc.rows * doc.cols || doc.b.length !== doc.rows) {
      throw new Error(
        `layer shape mismatch: ${doc.rows}x${doc.cols} with ${doc.w.length} weights, ${doc.b.length} biases`,
      );
    }
    if (!['relu', 'sigmoid', 'identity'].includes(doc.activation)) {
      throw new Error(`unknown activation '${doc.activation}'`);
    }
    this.rows = doc.rows;
    this.cols = doc.cols;
    this.activation = doc.activation;
    this.w = Float64Array.from(doc.w);
    this.b = Float64Array.from(doc.b);
  }

  apply(x: Float64Array): Float64Array {
    if (x.length !== this.cols) {
      throw new Error(`layer expects ${this.cols} inputs, got ${x.length}`);
    }
    const out = new Float64Array(this.rows);
    for (let i = 0; i < this.rows; i++) {
      let z = this.b[i];
      const row = i * this.cols;
      for (let j = 0; j < this.cols; j++) {
        z += this.w[row + j] * x[j];
      }
      if (this.activation === 'relu') {
        out[i] = z > 0 ? z : 0;
      } else if (this.activation === 'sigmoid') {
        out[i] = z >= 0 ? 1 / (1 + Math.exp(-z)) : Math.exp(z) / (1 + Math.exp(z));
      } else {
        out[i] = z;
      }
    }
    return out;
  }
}

interface Tower {
  name: string;
  offset: number;
  width: number;
  encoder: Layer[]; // input -> embedding
}

/** Segment layout of the model's input vector, in attribute order. */
export interface Segment {
  name: string;
  offset: number;
  width: number;
}

export class PortableModel {
  readonly fingerprint: string;
  readonly targetScale: number;
  readonly inputWidth: number;
  private readonly towers: Tower[];
  private readonly regressor: Layer[];

  constructor(doc: PortableDoc) {
    if (doc.format !== PORTABLE_FORMAT) {
      throw new Error(`not a portable model document (format='${doc.format}')`);
    }
    this.fingerprint = doc.schema_fingerprint;
    this.targetScale = doc.target_scale;
    this.towers = [];
    let offset = 0;
    let concat = 0;
    for (const attr of doc.attributes) {
      const layers = attr.layers.map((l) => new Layer(l));
      const encoder = layers.slice(0, attr.embedding_index + 1);
      if (encoder.length === 0) {
        throw new Error(`attribute '${attr.name}' has no encoder layers`);
      }
      this.towers.push({ name: attr.name, offset, width: encoder[0].cols, encoder });
      offset += encoder[0].cols;
      concat += encoder[encoder.length - 1].rows;
    }
    this.inputWidth = offset;
    this.regressor = doc.regressor.map((l) => new Layer(l));
    if (this.regressor[0].cols !== concat) {
      throw new Error(
        `regressor expects ${this.regressor[0].cols} inputs but embeddings concatenate to ${concat}`,
      );
    }
  }

  get segments(): Segment[] {
    return this.towers.map(({ name, offset, width }) => ({ name, offset, width }));
  }

  /** Prediction in data units (target scale applied) for one query vector. */
  predictOne(query: ArrayLike<number>): number {
    if (query.length !== this.inputWidth) {
      throw new Error(`query has ${query.length} entries, model expects ${this.inputWidth}`);
    }
    const parts: Float64Array[] = [];
    let concatWidth = 0;
    for (const tower of this.towers) {
      let h: Float64Array = new Float64Array(tower.width);
      for (let j = 0; j < tower.width; j++) {
        h[j] = query[tower.offset + j];
      }
      for (const layer of tower.encoder) {
        h = layer.apply(h);
      }
      parts.push(h);
      concatWidth += h.length;
    }
    const concat = new Float64Array(concatWidth);
    let at = 0;
    for (const part of parts) {
      concat.set(part, at);
      at += part.length;
    }
    let out: Float64Array = concat;
    for (const layer of this.regressor) {
      out = layer.apply(out);
    }
    return out[0] * this.targetScale;
  }

  predict(queries: ArrayLike<number>[]): number[] {
    return queries.map((q) => this.predictOne(q));
  }
}

/** Parse a fetched /model (or exported file) body into a usable model. */
export function parsePortable(json: unknown): PortableModel {
  if (typeof json !== 'object' || json === null) {
    throw new Error('portable model document must be a JSON object');
  }
  return new PortableModel(json as PortableDoc);
}
