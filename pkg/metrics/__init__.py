"""
Metrics

Multi-world and marginal forecasting metrics and the CSV metric report.
"""

from metrics.forecasting import (
    AGGREGATE_ROW,
    MetricReport,
    ScenarioForecast,
    build_report,
    colliding_agents,
    column_name,
    marginal_metrics,
    marginal_scene,
    multiworld_metrics,
    multiworld_scene,
)

__all__ = [
    "AGGREGATE_ROW",
    "MetricReport",
    "ScenarioForecast",
    "build_report",
    "colliding_agents",
    "column_name",
    "marginal_metrics",
    "marginal_scene",
    "multiworld_metrics",
    "multiworld_scene",
]
