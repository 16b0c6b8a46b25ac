"""
Scoring

Scene-level confidence scores from pooled mode embeddings.
"""

from scoring.scorer import SceneScorer, SceneScores, average_pool, max_pool

__all__ = ["SceneScorer", "SceneScores", "average_pool", "max_pool"]
