"""Deterministic CSV/JSON artifact writing and plot-ready report emission.

Floats are rendered with repr (shortest round-trip form), ints plainly;
no timestamps enter any artifact, so identical configs produce identical
bytes.
"""

import csv
import json
import os

from .errors import MissingArtifact


def _fmt(x):
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    if hasattr(x, "item"):  # numpy scalar
        return _fmt(x.item())
    return str(x)


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_summary(path, summary):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(x):
    if hasattr(x, "item"):
        return x.item()
    if hasattr(x, "tolist"):
        return x.tolist()
    return str(x)


def read_csv(path):
    with open(path, "r", newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def emit_report(artifacts_dir, outdir=None):
    """Repackage an experiment's artifacts into plot-ready column files.

    Each emitted file is plain two-or-more-column CSV data; a manifest
    lists what was produced.  No rendering happens here.
    """
    if not os.path.isdir(artifacts_dir):
        raise MissingArtifact(f"no artifact directory {artifacts_dir}")
    summary_path = os.path.join(artifacts_dir, "summary.json")
    if not os.path.exists(summary_path):
        raise MissingArtifact(f"no summary.json under {artifacts_dir}")
    with open(summary_path, "r", encoding="utf-8") as fh:
        summary = json.load(fh)
    outdir = outdir or os.path.join(artifacts_dir, "report")
    os.makedirs(outdir, exist_ok=True)
    experiment = summary.get("experiment", "")
    produced = []

    def emit(src_name, dst_name, columns):
        src = os.path.join(artifacts_dir, src_name)
        if not os.path.exists(src):
            return
        header, rows = read_csv(src)
        idx = [header.index(c) for c in columns if c in header]
        if not idx:
            return
        dst = os.path.join(outdir, dst_name)
        write_csv(dst, [header[i] for i in idx], [[r[i] for i in idx] for r in rows])
        produced.append(dst_name)

    if experiment == "spectrum":
        emit("trace.csv", "running_exponents.csv", ["step", "exponent_1"])
        header_rows = os.path.join(artifacts_dir, "trace.csv")
        if os.path.exists(header_rows):
            header, rows = read_csv(header_rows)
            write_csv(os.path.join(outdir, "running_exponents.csv"), header, rows)
            if "running_exponents.csv" not in produced:
                produced.append("running_exponents.csv")
    elif experiment == "dichotomy":
        emit("envelope.csv", "envelope_profile.csv", ["k", "K", "K_eps"])
        emit("dichotomy.csv", "K_samples.csv", ["sample", "K"])
    elif experiment == "solve":
        emit("solve.csv", "solution_profile.csv",
             ["k", "f_norm", "residual", "tail_bound"])
    elif experiment == "witness":
        emit("witness.csv", "tower_profile.csv",
             ["column", "level", "f_norm", "g_weighted"])
    elif experiment == "robustness":
        emit("robustness.csv", "contraction_profile.csv",
             ["trial", "max_ratio", "residual", "margin"])
    elif experiment == "induce":
        emit("induce.csv", "induced_exponents.csv", ["quantity", "value"])
    elif experiment == "mane":
        emit("mane.csv", "sequence_profile.csv",
             ["n", "beta", "alpha", "x_norm", "y_norm"])
    elif experiment == "oracle-compare":
        emit("oracle_compare.csv", "deviation_profile.csv",
             ["instance", "deviation"])
    elif experiment == "splitting":
        emit("splitting.csv", "splitting_blocks.csv",
             ["block", "exponent", "dim"])
    if not produced:
        raise MissingArtifact(f"nothing to report for experiment {experiment!r}")
    manifest = {"experiment": experiment, "files": sorted(produced)}
    write_summary(os.path.join(outdir, "manifest.json"), manifest)
    return manifest
