from .core import CounterSample, NullProfiler, Profiler, TaskRecord
from .export import (
    export_counters_csv,
    export_scatter_csv,
    export_task_graph,
    export_task_tree,
    export_trace,
    graph_node_count,
    scatter_keep,
    tree_node_count,
)

__all__ = [
    "CounterSample",
    "NullProfiler",
    "Profiler",
    "TaskRecord",
    "export_counters_csv",
    "export_scatter_csv",
    "export_task_graph",
    "export_task_tree",
    "export_trace",
    "graph_node_count",
    "scatter_keep",
    "tree_node_count",
]
