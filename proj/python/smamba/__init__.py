"""Python bindings for the SpectralMamba C++ core."""

from ._core import (  # noqa: F401
    ConfusionMatrix,
    Error,
    Metrics,
    ModelConfig,
    ModelWeights,
    SplitSpec,
    TrainConfig,
    conv_scan,
    count_macs,
    count_params,
    compute_metrics,
    discretize_taylor,
    discretize_zoh,
    evaluate,
    forward,
    init_weights,
    layer_plan,
    load_checkpoint,
    lr_at,
    make_split,
    predict,
    pss_scan,
    pss_unscan,
    recurrent_scan,
    save_checkpoint,
    slic_segment,
    ssm_conv_kernel,
    synth_scene,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
