"""octomini: desk-scale octree-AMR hydrodynamics with FMM gravity,
a futures-based task runtime with a simulated accelerator lane pool,
and a task-tree profiler."""

__version__ = "0.1.0"
