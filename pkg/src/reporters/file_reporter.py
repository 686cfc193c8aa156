"""File artifacts: atomic JSON/CSV/text writes and the signal-decay plot."""

from __future__ import annotations

import json
import logging
import os
import tempfile
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)


def _atomic_write(path: str | Path, payload: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    logger.debug("wrote %s (%d bytes)", path, len(payload))
    return path


def write_text(path: str | Path, text: str) -> Path:
    return _atomic_write(path, text.encode("utf-8"))


def write_json(path: str | Path, payload: Mapping[str, Any] | list) -> Path:
    """Pretty JSON; non-finite floats are rejected so artifacts stay portable."""
    text = json.dumps(payload, indent=2, allow_nan=False, ensure_ascii=False) + "\n"
    return write_text(path, text)


def write_csv(path: str | Path, frame: pd.DataFrame) -> Path:
    # Default float formatting is repr, which round-trips exactly
    return write_text(path, frame.to_csv(index=False, lineterminator="\n"))


def plot_decay(decay, path: str | Path, title: str) -> Path:
    """ROI-mean log-signal against b with the three regime fits and the F estimate.

    ``decay`` is a :class:`src.analyzers.decomposition.RoiDecay`.
    """
    b = np.asarray(decay.bvalues)
    signal = np.asarray(decay.mean_signal)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    positive = signal > 0
    ax.plot(b[positive], np.log(signal[positive]), "o", color="black", label="ROI mean")
    styles = {"ADC_0_100": ("tab:red", "--"), "ADC_100_800": ("tab:blue", "-"), "ADC_0_800": ("tab:gray", ":")}
    grid = np.linspace(0.0, float(b.max()), 50)
    for name, fit in decay.fits.items():
        if fit is None:
            continue
        color, style = styles.get(name, ("tab:green", "-."))
        ax.plot(
            grid,
            fit.log_s0 - fit.adc * grid,
            style,
            color=color,
            label=f"{name}: {fit.adc * 1e3:.3f}e-3 mm²/s",
        )
    if decay.f is not None:
        ax.annotate(f"F = {decay.f:.3f}", xy=(0.62, 0.88), xycoords="axes fraction")
    ax.set_xlabel("b (s/mm²)")
    ax.set_ylabel("ln S")
    ax.set_title(title)
    ax.legend(loc="lower left", fontsize="small")
    fig.tight_layout()

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".svg")
    os.close(fd)
    try:
        # Fixed hash salt and no date keep the SVG byte-stable across runs
        plt.rcParams["svg.hashsalt"] = "pd-dwi"
        fig.savefig(tmp, format="svg", metadata={"Date": None})
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    finally:
        plt.close(fig)
    return path
