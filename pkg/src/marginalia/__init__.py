"""Remove handwritten marginal annotations from scanned printed pages.

Stage one finds the printed body from smoothed projection profiles and cuts
away the margins; stage two uses connected components to bring printed text
that was cut away by mistake back into the body.
"""

from .components import (
    CharacterMetrics,
    Component,
    TextLine,
    detect_text_lines,
    estimate_character_metrics,
    label_components,
)
from .errors import (
    DegenerateInputError,
    ImageIOError,
    InvalidParameterError,
    MarginaliaError,
    MarginNotFoundError,
    UndefinedMetricError,
)
from .metrics import evaluate_document, pearson_correlation, recovery_accuracy, removal_accuracy
from .pipeline import PipelineConfig, batch, clean, clean_page, evaluate
from .preprocess import SkewEstimate, deskew, estimate_skew, remove_border_noise, rotate
from .profile import (
    MarginBox,
    ProjectionProfile,
    SmoothedProfile,
    detect_horizontal_margins,
    detect_margins,
    detect_vertical_margins,
    project,
    smooth,
    smoothing_window,
    strip_margins,
)
from .raster import Rect, binarize, clear_rect, ink_count, load_image, save_image, stamp_pixels
from .recovery import (
    PageNumberZone,
    RecoveryAction,
    page_number_zones,
    prune_unwanted,
    recover_broken_lines,
    recover_missed_lines,
    recover_page_number,
    recover_vertical_fragments,
    run_recovery,
)

__version__ = "0.1.0"
