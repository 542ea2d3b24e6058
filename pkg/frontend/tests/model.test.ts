import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';
import { describe, expect, it } from 'vitest';

import { encodeState, parseSchema, type SelectionMap } from '../src/encode';
import { parsePortable, type PortableDoc } from '../src/model';

const here = dirname(fileURLToPath(import.meta.url));
const fixture = JSON.parse(
  readFileSync(join(here, '..', 'fixtures', 'agreement.json'), 'utf8'),
) as {
  schema: Record<string, unknown>;
  model: PortableDoc;
  states: SelectionMap[];
  expected: number[];
};

/** A linear toy document whose prediction we can compute by hand. */
function identityDoc(): PortableDoc {
  // one attribute, 3 bins; encoder = identity on the first two inputs
  return {
    format: 'neurocube-portable',
    version: 1,
    schema_fingerprint: 'test',
    target_scale: 2.0,
    attributes: [
      {
        name: 'a',
        embedding_index: 0,
        layers: [
          {
            rows: 2,
            cols: 3,
            activation: 'identity',
            w: [1, 0, 0, 0, 1, 0],
            b: [0.5, -0.5],
          },
        ],
      },
    ],
    regressor: [
      { rows: 1, cols: 2, activation: 'identity', w: [3, -1], b: [10] },
    ],
  };
}

describe('portable model evaluation', () => {
  it('computes a hand-checkable linear prediction', () => {
    const model = parsePortable(identityDoc());
    // q = [1, 1, 0]: embedding = [1 + 0.5, 1 - 0.5] = [1.5, 0.5]
    // regressor = 3*1.5 - 1*0.5 + 10 = 14.0, scaled by 2 => 28
    expect(model.predictOne([1, 1, 0])).toBeCloseTo(28.0, 12);
  });

  it('applies relu and sigmoid activations', () => {
    const doc = identityDoc();
    doc.attributes[0].layers[0].activation = 'relu';
    doc.attributes[0].layers[0].b = [0.5, -1.5];
    const relu = parsePortable(doc);
    // embedding = relu([1.5, -0.5]) = [1.5, 0]; out = (4.5 + 10) * 2
    expect(relu.predictOne([1, 1, 0])).toBeCloseTo(29.0, 12);

    doc.attributes[0].layers[0].activation = 'sigmoid';
    doc.attributes[0].layers[0].b = [0, 0];
    doc.attributes[0].layers[0].w = [0, 0, 0, 0, 0, 0];
    const sig = parsePortable(doc);
    // embedding = sigmoid([0, 0]) = [0.5, 0.5]; out = (1.5 - 0.5 + 10) * 2
    expect(sig.predictOne([1, 0, 0])).toBeCloseTo(22.0, 12);

    // large-magnitude inputs must not overflow to NaN
    doc.attributes[0].layers[0].w = [1000, -1000, 0, 0, 0, 0];
    const extreme = parsePortable(doc);
    expect(Number.isFinite(extreme.predictOne([1, 0, 0]))).toBe(true);
  });

  it('rejects documents with the wrong format tag', () => {
    const doc = identityDoc();
    doc.format = 'something-else';
    expect(() => parsePortable(doc)).toThrow(/format/);
  });

  it('rejects weight arrays whose length mismatches rows*cols', () => {
    const doc = identityDoc();
    doc.attributes[0].layers[0].w = [1, 0, 0];
    expect(() => parsePortable(doc)).toThrow(/weight/);
  });

  it('rejects a regressor that does not fit the concatenated embeddings', () => {
    const doc = identityDoc();
    doc.regressor[0].cols = 5;
    doc.regressor[0].w = [1, 1, 1, 1, 1];
    expect(() => parsePortable(doc)).toThrow(/regressor/);
  });

  it('matches server predictions on 1000 random states to 1e-4', () => {
    const schema = parseSchema(fixture.schema);
    const model = parsePortable(fixture.model);
    expect(model.fingerprint).toBe(schema.fingerprint);
    let worst = 0;
    for (let i = 0; i < fixture.states.length; i++) {
      const got = model.predictOne(encodeState(schema, fixture.states[i]));
      const want = fixture.expected[i];
      const rel = Math.abs(got - want) / Math.max(Math.abs(want), 1e-9);
      worst = Math.max(worst, rel);
    }
    expect(fixture.states.length).toBe(1000);
    expect(worst).toBeLessThan(1e-4);
  });

  it('predicts batches identically to one-at-a-time evaluation', () => {
    const schema = parseSchema(fixture.schema);
    const model = parsePortable(fixture.model);
    const queries = fixture.states
      .slice(0, 16)
      .map((s) => encodeState(schema, s));
    const batch = model.predict(queries);
    queries.forEach((q, i) => {
      expect(batch[i]).toBe(model.predictOne(q));
    });
  });
});
