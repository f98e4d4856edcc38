from .latency import hardware_descriptor, latency_bench
from .metrics import LONG_NAME_WORDS, MetricsReport, macro_scores, pair_set_metrics, score_predictions
from .prcurve import PRPoint, dominance, interpolated_precision, pr_curve, write_csv
from .rescore import confidence_from_logprobs, score_extractions, score_pair, score_pairs, train_rescorer
from .systems import GenAVESystem, GenToCSystem, System, ToCAVESystem, build_system, evaluate, load_system
