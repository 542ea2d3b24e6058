"""neurocube: learned approximation of dashboard aggregation queries.

A schema describes the attributes of a tabular dataset and how each one is
discretized into bins.  An exact columnar oracle answers range-filtered
group-by queries over the ingested data; a compact multi-tower neural
network is trained on oracle answers and then stands in for the oracle at
interactive latency, small enough to ship to a browser.
"""

from neurocube.schema import (
    AttributeKind,
    AttributeSpec,
    Schema,
    SchemaError,
    OutOfDomainError,
    load_schema,
    bin_value,
    encoding_width,
)
from neurocube.oracle import (
    ColumnStore,
    SelectionState,
    EmptyAggregate,
    ingest_csv,
    aggregate,
    group_by,
)
from neurocube.encoding import (
    MalformedQueryError,
    encode_state,
    encode_states,
    decode_query,
    enumerate_ranges,
)
from neurocube.datagen import (
    RangeStrategy,
    TrainingSample,
    TrainingSet,
    sample_range_endpoints,
    sample_range_length_first,
    sample_state,
    expand_state,
    generate,
    make_batches,
)
from neurocube.nn import (
    ModelConfig,
    TowerConfig,
    Model,
    build,
    loss_pred,
    loss_ae,
    loss_total,
    adam_step,
    sgd_step,
    AdamState,
    save_model,
    load_model,
    export_portable,
)
from neurocube.training import (
    TrainPlan,
    EvalReport,
    DegenerateMetricError,
    TrainingDiverged,
    train,
    evaluate_rae,
)

__version__ = "0.1.0"
