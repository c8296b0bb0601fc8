"""Gated neuron selection: differentiable width search for tabular MLPs.

Each hidden neuron of a large MLP carries a stochastic Gumbel gate. Weights
(on training batches) and gate logits (on validation batches) are updated
alternately; neurons whose gates end up open are extracted, with their
weights, into a smaller network that is then fine-tuned.
"""
from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    IntegrityError,
    NumericError,
    ParseError,
    ReportSchemaError,
    ShapeError,
    StateError,
    TabGNSError,
)
from .kernels import BACKEND
from .search import (
    SearchConfig,
    SearchResult,
    evaluate,
    finetune,
    random_search_baseline,
    run_tabgns,
    search,
    train_fixed,
)
from .supernet import (
    Architecture,
    SearchSpace,
    SuperNet,
    count_parameters,
    extract_architecture,
    forward,
    init_supernet,
    predict,
)

__version__ = "0.1.0"

__all__ = [
    "Architecture", "BACKEND", "ConfigError", "DataError", "DivergenceError", "IntegrityError",
    "NumericError", "ParseError", "ReportSchemaError", "SearchConfig", "SearchResult", "SearchSpace",
    "ShapeError", "StateError", "SuperNet", "TabGNSError", "count_parameters", "evaluate",
    "extract_architecture", "finetune", "forward", "init_supernet", "predict", "random_search_baseline",
    "run_tabgns", "search", "train_fixed",
]
