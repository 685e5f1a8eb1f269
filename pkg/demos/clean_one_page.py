"""
Cleaning one annotated page
===========================

Build a synthetic page with handwriting in the margins, run both stages
of the cleaner and compare the result with the known clean page.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from marginalia import synthgen
from marginalia.metrics import evaluate_document
from marginalia.pipeline import build_report, clean_page, dump_report
from marginalia.raster import save_image

# a page with a running head, a page number and a few words spilling past
# the right margin, plus light marginal scribbles
spec = synthgen.PageSpec(seed=7, annotation_profile="light", header=True, chopped_words=True,
                         page_number_position=("bottom", "middle"))
truth = synthgen.generate(spec)
print("annotation ink:", int(truth.annotation_mask.sum()), "printed ink:", int(truth.clean.sum()))

result = clean_page(truth.annotated)
print("stage one body:", result.detection.box)
print("true text block:", truth.text_block)

# every recovery action names the rule that fired
for action in result.actions[:5]:
    print(action.rule, action.pixels_restored, action.bbox)
print("...", len(result.actions), "actions in total")

scores = evaluate_document(truth.clean, truth.annotation_mask, result.cleaned, result.removed)
print("removal %.4f  recovery %.4f  r %.4f" % (scores.removal_accuracy, scores.recovery_accuracy, scores.correlation))

# leftovers: ink that should be gone, and text that went missing
print("annotation kept:", int((result.cleaned & truth.annotation_mask).sum()))
print("text lost:", int((truth.clean & ~result.cleaned).sum()))

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
save_image(truth.annotated, out / "page_annotated.png")
save_image(result.cleaned, out / "page_cleaned.png")
save_image(result.removed, out / "page_removed.png")
(out / "page_report.json").write_text(dump_report(build_report(result, input_ink=int(truth.annotated.sum()),
                                                               doc_metrics=scores)))
print("images written to", out)
assert not np.any(result.cleaned & result.removed)
