"""Figure construction. Static PNG/SVG output, deterministic bytes.

Layout follows the upstream documents exactly: the spec chart draws one
column per regression (coefficient + CI above, design-marker matrix below,
one region per model); the bumpline draws one polyline per product across
the model x outcome columns at the ranks recorded in the document.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .documents import validate_bumpline, validate_spec_chart  # noqa: E402

# fixed salt + empty metadata so repeated renders are byte-identical
matplotlib.rcParams["svg.hashsalt"] = "chart-renderer"

CLASS_COLORS = {
    "neg_sig": "#c0392b",   # red: negative and significant
    "insig": "#ffffff",     # white: insignificant
    "pos_sig": "#2e6da4",   # blue: positive and significant
}

def _save(fig, out_path) -> None:
    # strip the writer's date stamp so repeated renders are byte-identical
    if str(out_path).lower().endswith(".svg"):
        metadata = {"Date": None}
    else:
        metadata = {"Software": "chart-renderer"}
    fig.savefig(out_path, dpi=100, metadata=metadata)
    plt.close(fig)


def render_spec_chart(document: dict, out_path, title: str | None = None) -> dict:
    """Write the figure; return a summary of what was drawn."""
    doc = validate_spec_chart(document)
    cells = [(region["model"], cell)
             for region in doc["regions"] for cell in region["cells"]]
    n = len(cells)
    fig_w = max(6.0, 0.22 * n + 2.0)
    fig, (ax_top, ax_bottom) = plt.subplots(
        2, 1, figsize=(fig_w, 6.0), height_ratios=[3, 2], sharex=True,
        constrained_layout=True,
    )

    xs = list(range(n))
    color_counts = {k: 0 for k in CLASS_COLORS}
    for x, (model, cell) in zip(xs, cells):
        color = CLASS_COLORS[cell["sig_class"]]
        color_counts[cell["sig_class"]] += 1
        ax_top.vlines(x, cell["ci_low"], cell["ci_high"], color="0.55", lw=1.0)
        ax_top.scatter([x], [cell["beta1"]], s=28, facecolor=color,
                       edgecolor="black", linewidth=0.6, zorder=3)
    ax_top.axhline(0.0, color="0.3", lw=0.8, ls="--")
    ax_top.set_ylabel("coefficient (95% CI)")

    models = [region["model"] for region in doc["regions"]]
    outcomes = sorted({cell.get("outcome", "") for _, cell in cells})
    products = sorted({cell.get("product", "") for _, cell in cells})
    marker_rows = ([("model", m) for m in models]
                   + [("outcome", o) for o in outcomes if o]
                   + [("product", p) for p in products if p])
    for ry, (kind, value) in enumerate(marker_rows):
        for x, (model, cell) in zip(xs, cells):
            present = (value == model) if kind == "model" else (cell.get(kind) == value)
            if present:
                ax_bottom.scatter([x], [ry], s=14, color="black")
    ax_bottom.set_yticks(range(len(marker_rows)))
    ax_bottom.set_yticklabels([v for _, v in marker_rows], fontsize=7)
    ax_bottom.invert_yaxis()
    ax_bottom.set_xlabel("specification")

    # vertical separators between model regions
    boundaries = []
    x = 0
    for region in doc["regions"][:-1]:
        x += len(region["cells"])
        boundaries.append(x - 0.5)
    for ax in (ax_top, ax_bottom):
        ax.set_xlim(-0.5, max(n - 0.5, 0.5))
        for b in boundaries:
            ax.axvline(b, color="0.75", lw=0.8)

    ax_top.set_title(title or f"{doc.get('country', '')} / {doc.get('metric', '')}")
    _save(fig, out_path)
    return {
        "n_columns": n,
        "n_regions": len(doc["regions"]),
        "models": models,
        "color_counts": color_counts,
        "region_boundaries": boundaries,
    }


def render_bumpline(document: dict, out_path, title: str | None = None) -> dict:
    """Write the rank-trajectory figure; return a summary of what was drawn."""
    doc = validate_bumpline(document)
    products = doc["products"]
    columns = doc["columns"]
    n_cols = len(columns)
    labels = [f"{c.get('model', '')}\n{c.get('outcome', '')}" for c in columns]

    fig, ax = plt.subplots(figsize=(max(6.0, 1.3 * n_cols), 4.5),
                           constrained_layout=True)
    paths: dict[str, list] = {}
    gaps = 0
    for product in products:
        ranks = [col["ranks"].get(product) for col in columns]
        paths[product] = ranks
        gaps += sum(r is None for r in ranks)
        xs = [x for x, r in enumerate(ranks) if r is not None]
        ys = [r for r in ranks if r is not None]
        ax.plot(xs, ys, marker="o", lw=1.5, label=product)
        # gap markers where a partial column has no rank for this product
        missing = [x for x, r in enumerate(ranks) if r is None]
        if missing:
            ax.scatter(missing, [len(products) + 0.6] * len(missing),
                       marker="x", color="0.4", s=20)

    ax.set_xticks(range(n_cols))
    ax.set_xticklabels(labels, fontsize=7)
    ax.set_yticks(range(1, len(products) + 1))
    ax.set_ylim(len(products) + 1, 0.5)  # rank 1 at the top
    ax.set_ylabel("rank")
    ax.legend(fontsize=7, loc="center left", bbox_to_anchor=(1.0, 0.5))
    ax.set_title(title or f"{doc.get('country', '')} / {doc.get('metric', '')}")
    _save(fig, out_path)
    return {
        "n_paths": len(products),
        "n_columns": n_cols,
        "paths": paths,
        "n_gap_markers": gaps,
    }
