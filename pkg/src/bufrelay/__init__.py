"""Buffer-aided two-way relaying with fixed-rate transmission over Rayleigh block fading."""
from .analytics import high_snr_summary, max_sum_throughput, system_outage
from .benchmarks import BenchmarkScheme, link_success_probs, optimize_benchmark, simulate_benchmark
from .channel import ChannelDraw, SystemParams, Thresholds, classify_region, draw_gains, make_thresholds
from .engine import RelayBuffers, SlotRecord, ThroughputReport, queue_trace, run, simulate, step
from .modes import SnrRegion, TransmissionMode
from .oracle import SelectionMetrics, SelectionWeights, dp_offline_optimum, selection_metrics, verify_policy_kkt
from .policy import DiceTable, StatisticalBranch, build_dice, expected_rates, identify_branch, select_mode
from .regions import RegionProbabilities, analytic_probabilities, high_snr_pmax

__version__ = "0.1.0"
