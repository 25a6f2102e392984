"""Benchmark reporting: delimited numbers plus a rendered figure.

The bench subcommand hands its per-repetition measurements here; the report
path gets a CSV next to a matplotlib PNG so results can be eyeballed and
scripted against without re-running the benchmark.
"""

from __future__ import annotations

import csv
import os


def write_bench_report(path, records, label: str):
    """Write records to ``path`` (CSV) and a figure alongside it.

    records: iterable of dicts with rep, wall_ms, samples, msamples_per_s.
    Returns (csv_path, figure_path).
    """
    records = list(records)
    if not records:
        raise ValueError("no benchmark records to report")
    csv_path = str(path)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["rep", "wall_ms", "samples", "msamples_per_s"])
        writer.writeheader()
        for rec in records:
            writer.writerow(
                {
                    "rep": rec["rep"],
                    "wall_ms": f"{rec['wall_ms']:.3f}",
                    "samples": rec["samples"],
                    "msamples_per_s": f"{rec['msamples_per_s']:.3f}",
                }
            )

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    reps = [rec["rep"] for rec in records]
    walls = [rec["wall_ms"] for rec in records]
    rates = [rec["msamples_per_s"] for rec in records]

    fig, (ax_wall, ax_rate) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_wall.bar(reps, walls, color="#4878d0")
    ax_wall.set_xlabel("repetition")
    ax_wall.set_ylabel("wall time (ms)")
    ax_wall.set_title("frame time")
    ax_rate.plot(reps, rates, marker="o", color="#d65f5f")
    ax_rate.set_xlabel("repetition")
    ax_rate.set_ylabel("Msamples/s")
    ax_rate.set_title("composited sample throughput")
    fig.suptitle(label)
    fig.tight_layout()

    figure_path = os.path.splitext(csv_path)[0] + ".png"
    fig.savefig(figure_path, dpi=110)
    plt.close(fig)
    return csv_path, figure_path
