"""Metrics CSV and latency figure."""

from __future__ import annotations

import csv
import io

COLUMNS = ["seq", "send_time_ns", "responder_recv_ns", "response_recv_ns", "one_way_ns", "rtt_ns", "lost"]


def _cell(v):
    return "" if v is None else v


def metrics_rows(samples) -> list[list]:
    return [[s.seq, s.send_time, _cell(s.recv_time), _cell(s.response_time), _cell(s.one_way),
             _cell(s.rtt), 1 if s.lost else 0] for s in samples]


def metrics_csv(samples) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    w.writerows(metrics_rows(samples))
    return buf.getvalue()


def write_metrics(samples, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(metrics_csv(samples))


def read_metrics(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def plot_latency(samples, path, title=""):
    """One-way and round-trip latency per ping, in milliseconds."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ok = [s for s in samples if not s.lost]
    lost = [s.seq for s in samples if s.lost]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot([s.seq for s in ok], [s.rtt / 1e6 for s in ok], ".-", lw=0.8, label="rtt")
    ax.plot([s.seq for s in ok], [s.one_way / 1e6 for s in ok], ".-", lw=0.8, label="one-way")
    if lost:
        ax.plot(lost, [0] * len(lost), "x", color="red", label="lost")
    ax.set_xlabel("ping seq")
    ax.set_ylabel("latency (ms)")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
