"""Mixed-frequency panel nowcasting with sparse-group LASSO MIDAS regressions."""

from .dictionaries import (
    Dictionary,
    MidasDesign,
    WeightCurve,
    beta_dictionary,
    beta_weights,
    legendre_dictionary,
    project_design,
    unrestricted_dictionary,
)
from .panel import (
    FrequencySpec,
    InformationSet,
    InsufficientHistoryError,
    LaggedWindow,
    PanelDataset,
    PanelFormatError,
    WindowSet,
    build_window_stack,
    build_windows,
    load_panel,
    write_panel,
)
from .solver import (
    FitResult,
    PenaltySpec,
    RegPath,
    backend_name,
    fit,
    fit_elastic_net,
    fit_path,
    kkt_residual,
    lambda_max,
    prox_sg,
)

__version__ = "0.1.0"
