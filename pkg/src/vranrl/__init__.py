"""RL-driven radio resource management on heterogeneous virtual RANs.

A slotted vRAN simulator, a differential semi-gradient SARSA agent with
tile-coded linear action values, a Pareto-efficient fair capacity allocator,
contextual-bandit and static-LTE baselines, and a reproducible experiment
harness.
"""

from .domain import (
    ActionIndex,
    Assignment,
    ContextBounds,
    ContextSample,
    DecodedAction,
    KpiTargets,
    RewardValue,
    SlotOutcome,
    action_count,
    decode_action,
    encode_action,
    mean_reward,
    reward_component,
    slot_reward,
)
from .tilecoding import FeatureSet, TileCoder, TileCoderConfig, kernel_backend, q_hat
from .env import LinkSpec, TrafficSpec, VranEnv, block_error_probability, measure_throughput
from .agent import (
    ExperimentDriver,
    SarsaAgent,
    select_epsilon_greedy,
    weighted_mean_context,
)
from .baselines import BanditAgent, CqiTable, StaticLtePolicy
from .harness import (
    ScenarioConfig,
    parse_scenario,
    run_experiment,
    summarize_csv,
    summarize_rows,
)

__version__ = "0.1.0"
