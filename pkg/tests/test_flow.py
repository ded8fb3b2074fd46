import json
import time

import pytest

from e2e_utils import build_project
from ocrflow import flow
from ocrflow.flow import (
    FlowError,
    JobRunner,
    PARAM_TIERS,
    ProcessFlowConfig,
    STEPS,
    run_flow,
    validate_flow,
)

FULL_STEPS = [
    "preprocess",
    "segment-dummy",
    "extract",
    "lineseg",
    "recognize",
    "results",
]


def _config(steps, **kw):
    return ProcessFlowConfig(steps=steps, **kw)


def test_param_tiers_cover_all_steps():
    assert set(PARAM_TIERS) == set(STEPS)
    for tiers in PARAM_TIERS.values():
        assert set(tiers) == {"general", "advanced"}


def test_validate_rejects_unknown_step(tmp_path):
    project, _ = build_project(tmp_path, model=None)
    with pytest.raises(FlowError, match="unknown step"):
        validate_flow(project, _config(["preprocesss"]))


def test_validate_rejects_bad_order(tmp_path):
    project, _ = build_project(tmp_path, model=None)
    with pytest.raises(FlowError, match="order"):
        validate_flow(project, _config(["lineseg", "preprocess"]))


def test_validate_rejects_missing_prerequisites(tmp_path):
    project, _ = build_project(tmp_path, model=None)
    # no segmentation ever ran, so extract/lineseg cannot start
    with pytest.raises(FlowError, match="segmentation"):
        validate_flow(project, _config(["extract"]))
    with pytest.raises(FlowError, match="binary"):
        validate_flow(project, _config(["segment-dummy"]))
    with pytest.raises(FlowError, match="line"):
        run_flow(project, _config(["preprocess", "segment-dummy"]))
        validate_flow(project, _config(["recognize"], params={"recognize": {"models": "x"}}))


def test_validate_rejects_unknown_pages(tmp_path):
    project, _ = build_project(tmp_path, model=None)
    with pytest.raises(FlowError, match="unknown pages"):
        validate_flow(project, _config(["preprocess"], pages=["9999"]))


def test_validate_accepts_resumed_pipeline(tmp_path):
    project, _ = build_project(tmp_path, model=None)
    run_flow(project, _config(["preprocess", "segment-dummy"]))
    # regions exist on disk now, so lineseg alone is fine
    assert validate_flow(project, _config(["lineseg"])) == ["0001", "0002"]


def test_full_flow_produces_expected_book(tmp_path):
    project, page_ids = build_project(tmp_path, n_pages=2)
    config = _config(FULL_STEPS, params={"recognize": {"models": "frak"}})
    job = run_flow(project, config)
    assert job.finished is not None
    assert all(s["state"] == "done" for s in job.page_state.values())
    assert set(job.timings) == set(FULL_STEPS)

    for pid in page_ids:
        page = project.load_page(pid)
        assert len(page.regions) == 1
        lines = page.regions[0].lines
        assert len(lines) == 3
        for line in lines:
            assert line.texts["frak"].text == "lorem ipsum"
        sidecar = json.loads((project.processing_dir / f"{pid}.pred.json").read_text())
        assert set(sidecar["lines"]) == {l.id for l in lines}
    book = (project.output_dir / "book.txt").read_text()
    assert book == "lorem ipsum\n" * 6


def test_flow_gt_override_and_rerun_is_byte_identical(tmp_path):
    project, _ = build_project(tmp_path, n_pages=2)
    config = _config(FULL_STEPS, params={"recognize": {"models": "frak"}})

    def run_once():
        run_flow(project, config)
        page = project.load_page("0001")
        page.regions[0].lines[0].set_gt("dolor sit amet")
        project.save_page(page)
        from ocrflow.project import generate_results

        generate_results(project)
        return (
            (project.output_dir / "book.txt").read_bytes(),
            project.xml_path("0001").read_bytes(),
            project.xml_path("0002").read_bytes(),
        )

    first = run_once()
    assert first[0].decode().splitlines()[0] == "dolor sit amet"
    assert first[0].decode().count("lorem ipsum") == 5
    second = run_once()
    assert first == second


def test_flow_isolates_failing_page(tmp_path):
    project, page_ids = build_project(tmp_path, n_pages=3, model=None)
    project.image_path("0002", "original").unlink()  # breaks preprocess for 0002
    job = run_flow(project, _config(["preprocess", "segment-dummy"]))
    states = {pid: s["state"] for pid, s in job.page_state.items()}
    assert states == {"0001": "done", "0002": "failed", "0003": "done"}
    assert job.page_state["0002"]["step"] == "preprocess"
    assert project.load_page("0001").regions
    assert project.load_page("0002").regions == []


def test_flow_page_subset_and_threads(tmp_path):
    project, _ = build_project(tmp_path, n_pages=3, model=None)
    job = run_flow(
        project, _config(["preprocess", "segment-dummy"], pages=["0002"], threads=2)
    )
    assert list(job.page_state) == ["0002"]
    assert project.load_page("0002").regions
    assert not project.load_page("0001").regions


def test_recognize_requires_models_param(tmp_path):
    project, _ = build_project(tmp_path)
    run_flow(project, _config(["preprocess", "segment-dummy", "lineseg"]))
    job = run_flow(project, _config(["recognize"]))
    assert all(s["state"] == "failed" for s in job.page_state.values())
    assert "models" in next(iter(job.page_state.values()))["reason"]


def test_evaluate_step_writes_eval_json(tmp_path):
    project, _ = build_project(tmp_path)
    run_flow(
        project,
        _config(
            ["preprocess", "segment-dummy", "lineseg", "recognize"],
            params={"recognize": {"models": "frak"}},
        ),
    )
    page = project.load_page("0001")
    page.regions[0].lines[0].set_gt("lorem ipsum")  # perfect line
    page.regions[0].lines[1].set_gt("lorXm ipsum")  # one substitution
    project.save_page(page)
    report, table = flow.run_evaluation(project)
    assert report.gt_chars == 22
    assert report.edit_distance == 1
    assert report.cer == 4.55
    payload = json.loads((project.processing_dir / "eval.json").read_text())
    assert payload["cer"]["cer"] == 4.55
    assert payload["confusion"]["entries"][0]["gt_fragment"] == "X"


def test_evaluation_without_pairs_raises(tmp_path):
    project, _ = build_project(tmp_path, model=None)
    with pytest.raises(FlowError):
        flow.run_evaluation(project)


def test_background_job_completes(tmp_path):
    project, _ = build_project(tmp_path, model=None)
    runner = JobRunner()
    job = runner.start(project, _config(["preprocess"]), background=True)
    assert runner.get(job.job_id) is job
    deadline = time.time() + 30
    while job.finished is None and time.time() < deadline:
        time.sleep(0.05)
    assert job.finished is not None
    assert job.to_json()["done"] is True
