"""Maximum-mutual-information feature transformation learning toolkit."""

from .dataset import (
    EpochSet,
    FoldPlan,
    Hierarchy,
    LabeledFeatures,
    OscClass,
    hierarchy_split,
    load_epochs,
    save_epochs,
    stratified_kfold,
    synth_gaussian,
    synth_oscillatory_epochs,
)
from .density import (
    ClassDensities,
    KdeModel,
    average_mi,
    error_bounds,
    kde_logpdf,
    label_entropy,
    silverman_bandwidth,
    stochastic_mi,
)
from .transform import (
    LinearTransform,
    MmiFit,
    StandardizationStats,
    TrainConfig,
    TwoLayerTransform,
    fit_mmi,
    forward,
    init_transform,
    mi_gradient,
    standardize_apply,
    standardize_fit,
)

__version__ = "0.1.0"
