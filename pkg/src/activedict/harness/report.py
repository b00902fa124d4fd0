"""Cross-run comparison tables built from ``curves.csv`` files."""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

import numpy as np

from .runner import fmt, mean_stderr, read_curves

REPORT_HEADER = ["rank", "policy", "encoder", "replicates",
                 "final_D_star_mean", "final_D_star_stderr",
                 "true_snr_db_mean", "true_snr_db_stderr",
                 "hist_dist_mean", "hist_dist_stderr", "runs"]


def replicate_summaries(run_dir, tail: int | None = None) -> list[dict]:
    """Per-replicate final D* and mean true-SNR / hist_dist.

    The means cover the last ``tail`` epochs, or every epoch when ``tail``
    is None.
    """
    by_rep = defaultdict(list)
    for row in read_curves(Path(run_dir) / "curves.csv"):
        by_rep[int(row["replicate"])].append(row)
    out = []
    for rep, rows in sorted(by_rep.items()):
        rows.sort(key=lambda r: int(r["epoch"]))
        window = rows[-tail:] if tail else rows
        out.append({
            "replicate": rep,
            "policy": rows[-1]["policy"],
            "encoder": rows[-1]["encoder"],
            "final_D_star": float(rows[-1]["D_star"]),
            "true_snr_db": float(np.mean([float(r["true_snr_db"]) for r in window])),
            "hist_dist": float(np.mean([float(r["hist_dist"]) for r in window])),
        })
    return out


def _incomplete_reason(run_dir: Path) -> str | None:
    if not (run_dir / "curves.csv").is_file():
        return "missing curves.csv"
    manifest = run_dir / "manifest.json"
    if manifest.is_file():
        try:
            status = json.loads(manifest.read_text()).get("status")
        except ValueError:
            return "unreadable manifest.json"
        if status != "complete":
            return f"run status is {status!r}"
    return None


def compare_report(run_dirs, out_path, tail: int | None = None) -> tuple[Path, list[str]]:
    """Rank (policy, encoder) groups by mean final D*, ascending.

    Incomplete runs are skipped; their reasons come back as the warning list.
    """
    groups = defaultdict(list)
    sources = defaultdict(list)
    warnings = []
    for run_dir in map(Path, run_dirs):
        reason = _incomplete_reason(run_dir)
        if reason:
            warnings.append(f"{run_dir}: {reason}")
            continue
        for summary in replicate_summaries(run_dir, tail):
            key = (summary["policy"], summary["encoder"])
            groups[key].append(summary)
            if str(run_dir) not in sources[key]:
                sources[key].append(str(run_dir))

    rows = []
    for (policy, encoder), reps in groups.items():
        d = mean_stderr(r["final_D_star"] for r in reps)
        snr = mean_stderr(r["true_snr_db"] for r in reps)
        hist = mean_stderr(r["hist_dist"] for r in reps)
        rows.append((d[0], policy, encoder, len(reps), d, snr, hist, sources[(policy, encoder)]))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for rank, (_, policy, encoder, count, d, snr, hist, runs) in enumerate(rows, 1):
            writer.writerow([rank, policy, encoder, count, fmt(d[0]), fmt(d[1]), fmt(snr[0]),
                             fmt(snr[1]), fmt(hist[0]), fmt(hist[1]), ";".join(runs)])
    return out_path, warnings
