from .counter import baseline_ensemble_curve, count_baseline, count_layer, count_model, output_shape
from .types import CurveRow, FlopReport, LayerCost, LayerCostSpec
