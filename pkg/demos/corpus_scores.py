"""
Scoring a small synthetic corpus
================================

Write a ground-truth corpus to disk, then clean and score it the same way
the ``evaluate`` command does. Heavy pages have strokes reaching into the
text, which is where removal accuracy drops.
"""

import sys
import tempfile
from pathlib import Path

from marginalia import synthgen
from marginalia.pipeline import PipelineConfig, evaluate

count = int(sys.argv[1]) if len(sys.argv) > 1 else 6
root = Path(tempfile.mkdtemp())
for i in range(count):
    synthgen.write_ground_truth(synthgen.generate(synthgen.corpus_spec(i)), root, f"doc{i:03d}")

out = evaluate(root, PipelineConfig(jobs=2), out_dir=root / "results")
for report in out["reports"]:
    m = report["metrics"]
    name = Path(report["input"]).name
    print(f"{name:22s} removal {m['removal_accuracy']:.4f} recovery {m['recovery_accuracy']:.4f} r {m['correlation']:.4f}")

agg = out["aggregate"]
for key in ("removal_accuracy", "recovery_accuracy", "correlation"):
    print(key, agg[key])
print((root / "results" / "metrics.csv").read_text())
