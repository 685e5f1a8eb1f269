import json

import numpy as np
import pytest

from marginalia.errors import DegenerateInputError, InvalidParameterError, MarginaliaError
from marginalia.pipeline import (
    PipelineConfig,
    batch,
    build_report,
    clean,
    clean_page,
    dump_report,
    evaluate,
    strip_wall_time,
)
from marginalia.raster import save_image
from marginalia.synthgen import PageSpec, corpus_spec, generate, write_ground_truth


@pytest.fixture(scope="module")
def light_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("light")
    for i in range(3):
        write_ground_truth(generate(corpus_spec(i, 5, ("light",))), d, f"doc{i:03d}")
    return d


def test_blank_page():
    result = clean_page(np.zeros((80, 60), bool))
    assert not result.cleaned.any() and not result.removed.any()
    assert any("no margins detected" in w for w in result.warnings)
    report = build_report(result)
    assert report["actions"] == [] and report["character_metrics"] is None


def test_conservation_and_disjointness():
    truth = generate(PageSpec(seed=12, annotation_profile="heavy", header=True, chopped_words=True,
                              page_number_position=("bottom", "left")))
    result = clean_page(truth.annotated)
    assert not (result.cleaned & result.removed).any()
    assert np.array_equal(result.cleaned | result.removed, result.preprocessed)
    assert not (result.cleaned & ~truth.annotated).any()


def test_report_reconciles():
    truth = generate(PageSpec(seed=13, header=True, page_number_position=("top", "middle")))
    result = clean_page(truth.annotated)
    r = build_report(result, input_ink=int(truth.annotated.sum()))
    ink = r["ink"]
    assert ink["stage_one_body"] + ink["stage_one_margin"] == ink["preprocessed"]
    assert ink["cleaned"] + ink["removed"] == ink["preprocessed"]
    assert ink["cleaned"] - ink["stage_one_body"] == r["restored_pixels"]["total"]
    assert sum(a["pixels_restored"] for a in r["actions"]) == r["restored_pixels"]["total"]
    json.loads(dump_report(r))


def test_near_idempotent_on_clean_page():
    truth = generate(PageSpec(seed=14, annotation_profile="none", header=True, chopped_words=True,
                              page_number_position=("bottom", "middle")))
    first = clean_page(truth.clean)
    lost = int(truth.clean.sum() - first.cleaned.sum())
    assert lost < 0.005 * truth.clean.sum()
    second = clean_page(first.cleaned)
    assert int(first.cleaned.sum() - second.cleaned.sum()) < 0.005 * first.cleaned.sum()


def test_skewed_page_is_straightened():
    truth = generate(PageSpec(seed=15, annotation_profile="none", skew=2.0))
    result = clean_page(truth.clean)
    assert result.skew_applied and abs(result.skew.angle - 2.0) <= 0.5
    assert not clean_page(truth.clean, PipelineConfig(deskew=False)).skew_applied


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        PipelineConfig(binarize="fixed")
    with pytest.raises(InvalidParameterError):
        PipelineConfig(connectivity=6)
    with pytest.raises(InvalidParameterError):
        PipelineConfig(jobs=0)
    assert PipelineConfig().replace(jobs=None, connectivity=4).connectivity == 4


def test_config_file(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nconnectivity = 4\nmin-line-run = 2  # words\ndeskew = off\nthreshold =\n")
    cfg = PipelineConfig.from_file(p, jobs=3)
    assert (cfg.connectivity, cfg.min_line_run, cfg.deskew, cfg.jobs) == (4, 2, False, 3)
    assert PipelineConfig.from_file(_write(tmp_path / "t.cfg", cfg.to_text())) == cfg
    with pytest.raises(InvalidParameterError):
        PipelineConfig.from_file(_write(tmp_path / "bad.cfg", "colour = red\n"))


def _write(path, text):
    path.write_text(text)
    return path


def test_clean_writes_outputs(tmp_path, light_dir):
    out = tmp_path / "out"
    out.mkdir()
    report = clean(light_dir / "doc000_annotated.png", out_dir=out, emit_profiles=out,
                   emit_components=out / "comps.csv")
    for name in ("doc000_annotated_cleaned.png", "doc000_annotated_removed.png", "doc000_annotated_report.json",
                 "doc000_annotated_column_profile.csv", "doc000_annotated_row_profile.csv", "comps.csv"):
        assert (out / name).exists(), name
    assert json.loads((out / "doc000_annotated_report.json").read_text())["input"] == report["input"]


def test_clean_missing_file_mentions_path(tmp_path):
    with pytest.raises(MarginaliaError, match="nope.png"):
        clean(tmp_path / "nope.png")


def test_evaluate_light_corpus(tmp_path, light_dir):
    out = evaluate(light_dir, out_dir=tmp_path)
    agg = out["aggregate"]
    assert agg["documents"] == 3 and agg["failures"] == []
    assert agg["removal_accuracy"]["mean"] >= 0.95
    assert agg["recovery_accuracy"]["mean"] >= 0.99
    rows = (tmp_path / "metrics.csv").read_text().splitlines()
    assert rows[0] == "doc,removal_acc,recovery_acc,correlation" and len(rows) == 4
    assert (tmp_path / "aggregate.json").exists()


def test_evaluate_empty_dir(tmp_path):
    with pytest.raises(DegenerateInputError, match="no documents found"):
        evaluate(tmp_path)


def test_evaluate_skips_missing_truth(tmp_path):
    write_ground_truth(generate(corpus_spec(0)), tmp_path, "a")
    write_ground_truth(generate(corpus_spec(1)), tmp_path, "b")
    (tmp_path / "b_mask.png").unlink()
    agg = evaluate(tmp_path)["aggregate"]
    assert agg["documents"] == 1 and len(agg["skipped"]) == 1


def test_batch_isolates_corrupt_file(tmp_path, light_dir):
    src = tmp_path / "in"
    src.mkdir()
    for i in range(2):
        (src / f"p{i}.png").write_bytes((light_dir / f"doc00{i}_annotated.png").read_bytes())
    (src / "p9.png").write_bytes(b"not an image")
    agg = batch(str(src / "*.png"), out_dir=tmp_path / "out")["aggregate"]
    assert agg["documents"] == 2 and len(agg["failures"]) == 1 and "p9.png" in agg["failures"][0]


def test_batch_no_match(tmp_path):
    with pytest.raises(DegenerateInputError, match="no files match"):
        batch(str(tmp_path / "*.png"))


def test_batch_parallel_matches_serial(light_dir):
    pattern = str(light_dir / "*_annotated.png")
    one = batch(pattern, PipelineConfig(jobs=1))["reports"]
    two = batch(pattern, PipelineConfig(jobs=2))["reports"]
    assert [dump_report(strip_wall_time(r)) for r in one] == [dump_report(strip_wall_time(r)) for r in two]


def test_gray_input_is_binarized(tmp_path):
    truth = generate(PageSpec(seed=16, annotation_profile="light"))
    gray = np.where(truth.annotated, 30, 220).astype(np.uint8)
    save_image(gray, tmp_path / "g.png")
    report = clean(tmp_path / "g.png")
    assert report["ink"]["input"] == int(truth.annotated.sum())
