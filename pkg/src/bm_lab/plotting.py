"""Optional PNG figures for scan reports (Agg backend, no display needed)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_scan", "plot_pair_margins", "plot_terms"]


def plot_scan(table: list, path, title: str = "") -> Path:
    s = np.array([r["s"] for r in table])
    v = np.array([r["value"] for r in table])
    c = np.array([r["chord"] for r in table])
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
    a1.plot(s, v, "o-", ms=3, label="value")
    a1.plot(s, c, "--", label="chord")
    a1.set_xlabel("s")
    a1.legend()
    a2.plot(s, v - c, "o-", ms=3)
    a2.axhline(0.0, color="k", lw=0.5)
    a2.set_xlabel("s")
    a2.set_ylabel("value - chord")
    fig.suptitle(title)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def plot_pair_margins(pairs: list, path, title: str = "") -> Path:
    s1 = sorted({p["s1"] for p in pairs})
    s2 = sorted({p["s2"] for p in pairs})
    M = np.full((len(s1), len(s2)), np.nan)
    for p in pairs:
        M[s1.index(p["s1"]), s2.index(p["s2"])] = p["margin"]
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(M, origin="lower", extent=(s2[0], s2[-1], s1[0], s1[-1]), aspect="auto")
    fig.colorbar(im, ax=ax, label="worst chord margin")
    ax.set_xlabel("s2")
    ax.set_ylabel("s1")
    ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def plot_terms(terms: dict, path, title: str = "") -> Path:
    keys = [k for k, v in terms.items() if isinstance(v, (int, float)) and not isinstance(v, bool)]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(range(len(keys)), [terms[k] for k in keys])
    ax.set_xticks(range(len(keys)), keys, rotation=30, ha="right")
    ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
