"""
Projection profiles and the mean line
=====================================

The body rectangle comes from two ink histograms: column counts for the
side margins and row counts for the top and bottom. Each is smoothed
with a moving average whose width scales with the page size over the
mean count; the outermost crossings of a reference line are the edges.
"""

import numpy as np

from marginalia import synthgen
from marginalia.profile import COLUMN, ROW, detect_horizontal_margins, detect_vertical_margins, project, smooth, smoothing_window

page = synthgen.generate(synthgen.PageSpec(seed=3, annotation_profile="light")).annotated

cols = project(page, COLUMN)
w = smoothing_window(cols)
sc = smooth(cols, w)
left, right = detect_vertical_margins(sc)
print("column window", w, "mean line %.1f" % sc.mean_line, "-> left", left, "right", right)

# rows: the reference is the mean of the smoothed peaks, not the raw mean,
# since blank gaps between text lines pull the raw mean down
rows = project(page, ROW)
w = smoothing_window(rows)
sr = smooth(rows, w)
top, bottom = detect_horizontal_margins(sr)
print("row window", w, "mean line %.1f" % sr.mean_line, "-> top", top, "bottom", bottom)
print("raw row mean %.1f" % rows.values.mean())

# a coarse text rendering of the smoothed row profile near the top edge
for r in range(top - 20, top + 25, 3):
    bar = "#" * int(np.clip(sr.values[r] / 10, 0, 60))
    mark = "<" if sr.values[r] >= sr.mean_line else " "
    print("%4d %s%s" % (r, mark, bar))
