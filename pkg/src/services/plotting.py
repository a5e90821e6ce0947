"""
Deterministic SVG figures: graphs of dual maps and orbit traces.
"""

import logging
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Polygon  # noqa: E402

from src.config.settings import settings  # noqa: E402
from src.core.exceptions import Unsupported  # noqa: E402
from src.services.autmap import PiecewiseFractionalMap, apply  # noqa: E402
from src.services.dynamics import OrbitRecord  # noqa: E402
from src.services.geometry import rational_grid  # noqa: E402

logger = logging.getLogger(__name__)

plt.rcParams["svg.hashsalt"] = settings.app_name
plt.rcParams["svg.fonttype"] = "none"


def _figure(columns: int = 1):
    return plt.subplots(
        1,
        columns,
        figsize=(settings.plot_width_inches * columns, settings.plot_height_inches),
        dpi=settings.plot_dpi,
        squeeze=False,
    )


def _save(fig, output: Union[str, Path]) -> Path:
    output = Path(output)
    fig.savefig(output, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Wrote {output}")
    return output


def plot_map_graph(map: PiecewiseFractionalMap, output: Union[str, Path]) -> Path:
    """
    Graph of S for n = 2; source and image cells side by side for n = 3.

    Raises:
        Unsupported: n >= 4
    """
    if map.n >= 4:
        raise Unsupported(f"Map graphs are drawn for n <= 3, got n = {map.n}")
    fig, axes = _figure(1 if map.n == 2 else 2)

    if map.n == 2:
        ax = axes[0][0]
        xs = [p[0] for p in rational_grid(1, settings.plot_samples)]
        ys = [apply(map, (x,))[0] for x in xs]
        ax.plot([float(x) for x in xs], [float(y) for y in ys], color="black", linewidth=1.0)
        breakpoints = [v[0] for v in map.source.vertices]
        ax.plot(
            [float(x) for x in breakpoints],
            [float(apply(map, (x,))[0]) for x in breakpoints],
            "o", color="tab:red", markersize=3,
        )
        ax.set_xlabel("x")
        ax.set_ylabel("S(x)")
    else:
        source_ax, image_ax = axes[0]
        for cell_id in range(len(map.source)):
            points = map.source.polytopes[cell_id]
            images = [apply(map, p) for p in points]
            source_ax.add_patch(Polygon([[float(c) for c in p] for p in points], fill=False, linewidth=0.8))
            image_ax.add_patch(Polygon([[float(c) for c in p] for p in images], fill=False, linewidth=0.8))
        source_ax.set_title("source cells")
        image_ax.set_title("image cells")

    for ax in axes[0]:
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.set_aspect("equal")
    return _save(fig, output)


def plot_orbit(record: OrbitRecord, output: Union[str, Path]) -> Path:
    """One trace per coordinate against the step index."""
    fig, axes = _figure()
    ax = axes[0][0]
    steps = list(range(len(record.points)))
    d = len(record.points[0])
    for k in range(d):
        values = [float(p[k]) for p in record.points]
        ax.plot(steps, values, linewidth=0.8, label=f"coord_{k + 1}")
    ax.set_xlabel("step")
    ax.set_ylim(0, 1)
    ax.set_title(f"{record.mode.value} orbit")
    if d > 1:
        ax.legend(loc="upper right")
    return _save(fig, output)
