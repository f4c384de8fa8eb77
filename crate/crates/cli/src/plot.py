"""Plots for a resilient-optsim output directory.

Usage: python plot.py [DIR]   (defaults to the directory holding this file)
Needs pandas and matplotlib. Writes PNG files next to the CSVs.
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent
states = pd.read_csv(out / "states.csv")
edges = pd.read_csv(out / "edges.csv")
events = pd.read_csv(out / "events.csv")


def per_agent(column, ylabel, name):
    if column not in states:
        return
    fig, ax = plt.subplots(figsize=(7, 4))
    for agent, rows in states.groupby("agent"):
        ax.plot(rows["t"], rows[column], label=f"agent {agent}", lw=1)
    ax.set_xlabel("t (s)")
    ax.set_ylabel(ylabel)
    ax.legend(ncol=4, fontsize=7)
    fig.tight_layout()
    fig.savefig(out / name, dpi=150)
    plt.close(fig)


per_agent("y1", "output y1", "outputs_1.png")
per_agent("y2", "output y2", "outputs_2.png")
per_agent("delta1", "observer delta1", "delta_1.png")
per_agent("w1", "dual w1", "dual_1.png")

fig, ax = plt.subplots(figsize=(7, 4))
for (i, j), rows in edges[edges["i"] < edges["j"]].groupby(["i", "j"]):
    ax.plot(rows["t"], rows["c_hat"], lw=1, label=f"{i}-{j}")
ax.set_xlabel("t (s)")
ax.set_ylabel("sampled edge weight")
ax.legend(ncol=6, fontsize=6)
fig.tight_layout()
fig.savefig(out / "edge_weights.png", dpi=150)
plt.close(fig)

triggers = events[events["kind"] == "trigger"]
if not triggers.empty:
    fig, ax = plt.subplots(figsize=(7, 4))
    senders = sorted(triggers["sender"].unique())
    for k, s in enumerate(senders):
        t = triggers.loc[triggers["sender"] == s, "t"]
        ax.scatter(t, [k] * len(t), s=2)
    ax.set_yticks(range(len(senders)), [f"agent {s}" for s in senders])
    cuts = events[events["kind"] == "isolation"]
    for t in cuts["t"]:
        ax.axvline(t, color="red", lw=0.5, alpha=0.5)
    ax.set_xlabel("t (s)")
    ax.set_title("transmissions (red: isolations)")
    fig.tight_layout()
    fig.savefig(out / "triggers.png", dpi=150)
    plt.close(fig)

print(f"plots written to {out}")
