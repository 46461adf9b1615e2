from .expert import Expert, ScriptedExpertConfig, scripted_expert
from .rollout import RolloutResult, rollout, running_metrics
from .report import (MetricsTable, TableRow, normalized_scores, render_csv,
                     render_normalized_csv, render_text)
from .ablation import (AblationResult, CellResult, dataset_fingerprint,
                       run_ablation, summarize)

__all__ = [
    "AblationResult", "CellResult", "Expert", "MetricsTable",
    "RolloutResult", "ScriptedExpertConfig", "TableRow",
    "dataset_fingerprint", "normalized_scores", "render_csv",
    "render_normalized_csv", "render_text", "rollout", "run_ablation",
    "running_metrics",
    "scripted_expert", "summarize",
]
