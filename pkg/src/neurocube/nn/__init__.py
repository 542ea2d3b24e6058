"""From-scratch dense network: layers, towers, losses, optimizers, serialization."""

from neurocube.nn.layers import DenseLayer, Stack, init_layer, RELU, SIGMOID, IDENTITY
from neurocube.nn.losses import loss_pred, loss_ae, loss_total, BCE_EPS
from neurocube.nn.model import (
    AttributeTower,
    ConfigError,
    ForwardResult,
    Model,
    ModelConfig,
    TowerConfig,
    backward,
    batch_loss,
    build,
    expected_parameter_count,
    forward,
    forward_cache,
    predict,
    train_step_loss,
)
from neurocube.nn.optim import AdamState, adam_step, sgd_step
from neurocube.nn.io import (
    ModelFormatError,
    export_portable,
    import_portable,
    load_model,
    save_model,
)
