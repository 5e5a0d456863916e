"""Profiler exports: DOT task tree/graph, trace events, CSV, scatter."""

import json

from .core import ROOT_CHAIN


def _aggregate_by_chain(records):
    agg = {}
    for r in records:
        row = agg.setdefault(r.chain, [r.task_type, 0, 0])
        row[1] += 1
        row[2] += r.stop - r.start
    return agg


def _dot_escape(s):
    return str(s).replace('"', '\\"')


def _heat_color(share):
    """White-to-red fill; intensity scales linearly with the time share."""
    other = int(round(255 * (1.0 - min(max(share, 0.0), 1.0))))
    return f"#ff{other:02x}{other:02x}"


def export_task_tree(records, profiler):
    """DOT digraph keyed by (task type, full dependency chain)."""
    agg = _aggregate_by_chain(records)
    total = sum(row[2] for row in agg.values()) or 1
    lines = ["digraph task_tree {", '  node [shape=box, style=filled];']
    for cid, (name, count, tns) in sorted(agg.items()):
        share = tns / total
        label = f"{name}\\ncalls={count}\\ntotal={tns / 1e6:.3f} ms"
        lines.append(
            f'  c{cid} [label="{_dot_escape(label)}", fillcolor="{_heat_color(share)}"];'
        )
    for cid in sorted(agg):
        parent = profiler._chains[cid][0]
        if parent is not None and parent != ROOT_CHAIN and parent in agg:
            lines.append(f"  c{parent} -> c{cid};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_task_graph(records, profiler):
    """DOT digraph keyed by task type with immediate parent-type edges."""
    nodes = {}
    edges = {}
    for r in records:
        row = nodes.setdefault(r.task_type, [0, 0])
        row[0] += 1
        row[1] += r.stop - r.start
        parent_cid = profiler._chains[r.chain][0]
        if parent_cid is not None and parent_cid != ROOT_CHAIN:
            parent_type = profiler._chains[parent_cid][1]
            edges[(parent_type, r.task_type)] = edges.get((parent_type, r.task_type), 0) + 1
    total = sum(v[1] for v in nodes.values()) or 1
    lines = ["digraph task_graph {", '  node [shape=box, style=filled];']
    ids = {}
    for i, (name, (count, tns)) in enumerate(sorted(nodes.items())):
        ids[name] = i
        label = f"{name}\\ncalls={count}\\ntotal={tns / 1e6:.3f} ms"
        lines.append(
            f'  n{i} [label="{_dot_escape(label)}", fillcolor="{_heat_color(tns / total)}"];'
        )
    for (a, b), count in sorted(edges.items()):
        lines.append(f'  n{ids[a]} -> n{ids[b]} [label="{count}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def tree_node_count(records):
    return len({r.chain for r in records})


def graph_node_count(records):
    return len({r.task_type for r in records})


# -- trace events --------------------------------------------------------------

_CLASS_OFFSET = {"lane": 0, "memory": 1, "sync": 2}


def _tid(record):
    """Three virtual threads per lane (kernel/memory/sync); workers above."""
    if record.lane is not None:
        return 3 * record.lane + _CLASS_OFFSET.get(record.kind, 0)
    base = 1_000_000
    return base + (record.worker if record.worker is not None else 999)


def export_trace(records, profiler, pid=1):
    """Trace-event JSON: one complete ('X') event per record."""
    t0 = profiler.start_ns
    events = []
    seen_tids = {}
    for r in records:
        tid = _tid(r)
        if tid not in seen_tids:
            if r.lane is not None:
                cls = ("kernel", "memory", "sync")[_CLASS_OFFSET.get(r.kind, 0)]
                tname = f"lane{r.lane}/{cls}"
            else:
                tname = f"worker-{r.worker}"
            seen_tids[tid] = tname
        events.append(
            {
                "name": r.task_type,
                "cat": r.kind,
                "ph": "X",
                "ts": (r.start - t0) / 1000.0,
                "dur": (r.stop - r.start) / 1000.0,
                "pid": pid,
                "tid": tid,
            }
        )
    meta = [
        {
            "name": "thread_name",
            "ph": "M",
            "pid": pid,
            "tid": tid,
            "args": {"name": tname},
        }
        for tid, tname in sorted(seen_tids.items())
    ]
    return json.dumps({"traceEvents": meta + events, "displayTimeUnit": "ms"}, indent=1)


# -- scatter sampling ------------------------------------------------------------

def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def scatter_keep(index, fraction, seed=12345):
    """Deterministic pseudorandom keep decision for record `index`."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    if fraction >= 1.0:
        return True
    h = _splitmix64(index ^ (seed * 0x2545F4914F6CDD1D))
    return h < fraction * 2.0**64


def export_scatter_csv(records, profiler, fraction=0.01, seed=12345):
    """CSV of sampled (start_us, duration_us, task_type) points."""
    t0 = profiler.start_ns
    lines = ["start_us,duration_us,task_type"]
    for i, r in enumerate(records):
        if scatter_keep(i, fraction, seed):
            lines.append(
                f"{(r.start - t0) / 1000.0:.3f},{(r.stop - r.start) / 1000.0:.3f},{r.task_type}"
            )
    return "\n".join(lines) + "\n"


def export_counters_csv(samples, profiler):
    """CSV of every counter sample (counters are never subsampled)."""
    t0 = profiler.start_ns
    lines = ["t_us,name,value"]
    for s in samples:
        lines.append(f"{(s.t_ns - t0) / 1000.0:.3f},{s.name},{s.value!r}")
    return "\n".join(lines) + "\n"
