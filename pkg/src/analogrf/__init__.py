"""Random-feature kernel approximation with a simulated analog crossbar backend."""

from .kernels import (
    Kernel,
    GramPair,
    kernel_eval,
    gram,
    approx_error,
    mse,
    attention_exact,
)
from .features import (
    Sampler,
    FeatureMapSpec,
    ProjectionMatrix,
    sample_projection,
    sample_rff,
    sample_orf,
    sample_sorf,
    map_features,
    feature_map,
    softmax_trig_features,
    fwht,
)
from .analog import (
    MvmBackend,
    ExactBackend,
    AnalogBackend,
    AnalogTileConfig,
    ProgrammedTile,
    program,
    calibrate,
    analog_matvec,
    analog_matmat,
)
from .ridge import RidgeModel, fit, predict, predict_features, evaluate
from .attention import (
    AttentionProblem,
    FavorOutput,
    FlopCounter,
    favor_attention,
    relu_attention,
    attention_error_experiment,
)
from .data import (
    Dataset,
    SplitSpec,
    Standardizer,
    parse_libsvm,
    serialize_libsvm,
    split,
    standardize_fit_apply,
    synth_attention_problem,
    synthetic_blobs,
)
from .costs import (
    HardwareProfile,
    FlopMethod,
    FlopReport,
    inference_flops,
    mapping_cost,
    load_profiles,
)

__version__ = "0.1.0"
