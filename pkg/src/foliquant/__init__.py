"""Projectively invariant quantization on foliated charts.

Submodules: ``taylor`` (truncated multivariate jets), ``symtensor``
(symmetric tensors), ``exprlang`` (scalar field expressions), ``jetgroup``
(second-order frames and the isotropy group), ``chart`` (charts, connections,
adapted diffeomorphisms), ``cartan`` (normal Cartan connections), ``quant``
(the quantization map), ``verify`` (seeded property suites) and ``cli``.
"""

from .cartan import CartanConn, adapted_cartan, check_normal, foliated_cartan
from .chart import (
    AdaptedConnection,
    AdaptedDiffeo,
    AdaptednessError,
    CodimensionError,
    FoliatedChart,
    FoliatedConnection,
    OneForm,
    induce_foliated,
    projective_shift,
    pushforward,
    validate_adapted,
)
from .exprlang import parse
from .quant import (
    OperatorTable,
    Quantizer,
    SymbolField,
    extract_operator,
    quantize,
    quantize_adapted,
    quantize_foliated,
    reduce_function,
    reduce_symbol,
)
from .symtensor import SymTensor
from .taylor import Jet

__version__ = "0.1.0"

__all__ = [
    "AdaptedConnection",
    "AdaptedDiffeo",
    "AdaptednessError",
    "CartanConn",
    "CodimensionError",
    "FoliatedChart",
    "FoliatedConnection",
    "Jet",
    "OneForm",
    "OperatorTable",
    "Quantizer",
    "SymTensor",
    "SymbolField",
    "adapted_cartan",
    "check_normal",
    "extract_operator",
    "foliated_cartan",
    "induce_foliated",
    "parse",
    "projective_shift",
    "pushforward",
    "quantize",
    "quantize_adapted",
    "quantize_foliated",
    "reduce_function",
    "reduce_symbol",
    "validate_adapted",
]
