"""Report rendering: delimited tables with matplotlib figures alongside.

Two report surfaces exist: training logs (loss / per-language dev F1 over
steps) and the paired fine-tuning delta matrix. Each writes a plain
tab-separated file and a PNG figure next to it.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .training import DeltaReport, LogRow  # noqa: E402


def plot_training_curves(rows: list[LogRow], png_path: str) -> None:
    """Loss and per-language dev F1 against training step."""
    fig, (ax_loss, ax_f1) = plt.subplots(1, 2, figsize=(9, 3.5))
    steps = sorted({r.step for r in rows})
    loss_by_step = {}
    for r in rows:
        loss_by_step.setdefault(r.step, r.loss)
    ax_loss.plot(steps, [loss_by_step[s] for s in steps], marker=".", color="tab:red")
    ax_loss.set_xlabel("step")
    ax_loss.set_ylabel("mean batch loss")
    ax_loss.set_title("training loss")

    langs = sorted({r.lang for r in rows if r.lang != "-"})
    for lang in langs:
        pts = [(r.step, r.dev_f1) for r in rows if r.lang == lang]
        ax_f1.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=lang)
    ax_f1.set_xlabel("step")
    ax_f1.set_ylabel("dev F1")
    ax_f1.set_ylim(0, 102)
    ax_f1.set_title("dev F1 per language")
    if langs:
        ax_f1.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)


def write_delta_table(report: DeltaReport, tsv_path: str) -> None:
    """Tab-separated delta matrix with row/column averages and best auxiliary."""
    with open(tsv_path, "w", encoding="utf-8") as fh:
        header = ["tested"] + [f"aux:{a}" for a in report.languages]
        header += ["average", "best", "best_aux"]
        fh.write("\t".join(header) + "\n")
        for ti, tested in enumerate(report.languages):
            cells = [f"{report.deltas[ti, ai]:+.2f}" for ai in range(len(report.languages))]
            aux, best = report.best[ti]
            fh.write("\t".join(
                [tested] + cells
                + [f"{report.row_avg[ti]:+.2f}", f"{best:+.2f}", aux or "none"]
            ) + "\n")
        fh.write("\t".join(
            ["average"] + [f"{v:+.2f}" for v in report.col_avg] + ["", "", ""]
        ) + "\n")


def plot_delta_heatmap(report: DeltaReport, png_path: str) -> None:
    k = len(report.languages)
    fig, ax = plt.subplots(figsize=(1.2 * k + 2.5, 1.0 * k + 2.0))
    lim = max(abs(report.deltas).max(), 0.5)
    im = ax.imshow(report.deltas, cmap="RdYlGn", vmin=-lim, vmax=lim)
    ax.set_xticks(range(k), report.languages, rotation=45, ha="right")
    ax.set_yticks(range(k), report.languages)
    ax.set_xlabel("auxiliary language")
    ax.set_ylabel("language tested")
    ax.set_title("dev F1 change, paired vs. individual fine-tuning")
    for ti in range(k):
        for ai in range(k):
            ax.text(ai, ti, f"{report.deltas[ti, ai]:+.2f}",
                    ha="center", va="center", fontsize=9)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)


def write_delta_report(report: DeltaReport, out_dir: str,
                       stem: str = "paired_deltas") -> tuple[str, str]:
    """Write both the TSV table and the heatmap; returns their paths."""
    os.makedirs(out_dir, exist_ok=True)
    tsv = os.path.join(out_dir, f"{stem}.tsv")
    png = os.path.join(out_dir, f"{stem}.png")
    write_delta_table(report, tsv)
    plot_delta_heatmap(report, png)
    return tsv, png
