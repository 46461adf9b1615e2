from .metrics import (
    CHANNEL_NAMES, IMPULSE_FLOOR, EpisodeMetrics, FilterConfig, Verdict,
    compute_impulse, compute_metrics, filter_episode,
)
from .episode import Episode, EpisodeWriter, list_episodes, load_episode
from .dataset import (
    ACTION_DIM, PROPRIO_DIM, Dataset, DatasetConfig, Normalizer,
    build_dataset, build_observation, pool_image,
)

__all__ = [
    "ACTION_DIM", "CHANNEL_NAMES", "IMPULSE_FLOOR", "PROPRIO_DIM",
    "Dataset", "DatasetConfig", "Episode", "EpisodeMetrics", "EpisodeWriter",
    "FilterConfig", "Normalizer", "Verdict",
    "build_dataset", "build_observation", "compute_impulse",
    "compute_metrics", "filter_episode", "list_episodes", "load_episode",
    "pool_image",
]
