"""Configurable multi-step process flow over a project's pages.

Steps run in order; within a step pages are processed concurrently up
to the configured thread count. A page failing one step is skipped by
later steps but never aborts the whole job. Dependency violations are
rejected before anything runs.
"""

import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ocrflow import evaluate, layout, lineseg, preprocess, project as project_mod, recognize
from ocrflow.engines import LineRecognizer, ModelRegistry
from ocrflow.pagexml import GT_KEY

STEPS = (
    "preprocess",
    "segment-dummy",
    "segment-manual",
    "extract",
    "lineseg",
    "recognize",
    "evaluate",
    "results",
)

# parameters surfaced in the UI, split into general and advanced tiers
PARAM_TIERS = {
    "preprocess": {
        "general": ["threshold", "deskew_page"],
        "advanced": ["percentile_lo", "percentile_hi", "bg_window_fraction",
                     "max_skew", "steps_per_degree", "border_ignore"],
    },
    "segment-dummy": {"general": ["max_columns"], "advanced": ["margin"]},
    "segment-manual": {"general": [], "advanced": []},
    "extract": {"general": [], "advanced": []},
    "lineseg": {"general": ["min_ccs"], "advanced": ["noise_px"]},
    "recognize": {"general": ["models"], "advanced": ["source", "timeout"]},
    "evaluate": {"general": [], "advanced": ["top_k"]},
    "results": {"general": [], "advanced": []},
}

_SEGMENT_STEPS = {"segment-dummy", "segment-manual"}


class FlowError(Exception):
    pass


@dataclass
class ProcessFlowConfig:
    steps: list
    params: dict = field(default_factory=dict)
    pages: object = "all"  # "all" or list of page ids
    threads: int = 0  # 0 = available maximum

    def step_params(self, step):
        return dict(self.params.get(step, {}))


@dataclass
class JobStatus:
    job_id: str
    steps: list
    page_state: dict  # page id -> {"state": ..., "step": ..., "reason": ...}
    started: float
    finished: float = None
    timings: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "job_id": self.job_id,
            "steps": self.steps,
            "pages": self.page_state,
            "started": self.started,
            "finished": self.finished,
            "timings": self.timings,
            "done": self.finished is not None,
        }


def validate_flow(project, config):
    """Reject unknown steps, bad ordering, and missing prerequisites."""
    for step in config.steps:
        if step not in STEPS:
            raise FlowError(f"unknown step {step!r}")
    order = {s: i for i, s in enumerate(STEPS)}
    indices = [order[s] for s in config.steps if s != "results"]
    if indices != sorted(indices):
        raise FlowError("steps must respect the pipeline order")

    def satisfied(requirement_steps, has_artifact):
        if any(s in config.steps for s in requirement_steps):
            return True
        return has_artifact()

    page_ids = _selected_pages(project, config)

    def pages_have(predicate):
        def check():
            if not page_ids:
                return False
            for pid in page_ids:
                try:
                    page = project.load_page(pid)
                except Exception:
                    return False
                if not predicate(page, pid):
                    return False
            return True

        return check

    if "extract" in config.steps or "lineseg" in config.steps:
        if not satisfied(
            _SEGMENT_STEPS, pages_have(lambda p, _: bool(p.regions))
        ):
            raise FlowError("extract/lineseg requires a segmentation step first")
    if "lineseg" in config.steps or "recognize" in config.steps:
        if "lineseg" not in config.steps and "recognize" in config.steps:
            if not pages_have(
                lambda p, _: any(r.lines for r in p.regions if r.kind == "text")
            )():
                raise FlowError("recognize requires line segmentation first")
    if "preprocess" not in config.steps:
        needs_binary = {"segment-dummy", "lineseg", "recognize"} & set(config.steps)
        if needs_binary and not all(
            project.image_path(pid, "binary").is_file() for pid in page_ids
        ):
            raise FlowError("binary images missing; run preprocess first")
    return page_ids


def _selected_pages(project, config):
    all_ids = project.page_ids()
    if config.pages == "all":
        return all_ids
    missing = [p for p in config.pages if p not in all_ids]
    if missing:
        raise FlowError(f"unknown pages: {missing}")
    return list(config.pages)


def _step_preprocess(project, page_id, params):
    raw = preprocess.load_gray(project.image_path(page_id, "original"))
    norm_params = {
        k: params[k]
        for k in ("percentile_lo", "percentile_hi", "bg_window_fraction")
        if k in params
    }
    skew_params = {
        k: params[k]
        for k in ("max_skew", "steps_per_degree", "border_ignore")
        if k in params
    }
    norm = preprocess.normalize_gray(raw, **norm_params)
    binary = preprocess.binarize(norm, params.get("threshold", 0.5))
    if params.get("deskew_page", True):
        est = preprocess.estimate_skew(binary, **skew_params)
        if est.angle:
            norm = preprocess.deskew(norm, -est.angle)
            binary = preprocess.deskew(binary, -est.angle)
    preprocess.save_gray(norm, project.image_path(page_id, "gray"))
    preprocess.save_binary(binary, project.image_path(page_id, "binary"))
    page = project.load_page(page_id)
    page.image_gray = f"{page_id}.nrm.png"
    page.image_binary = f"{page_id}.bin.png"
    project.save_page(page)


def _step_segment_dummy(project, page_id, params):
    binary = preprocess.load_binary(project.image_path(page_id, "binary"))
    max_columns = int(params.get("max_columns", 1))
    regions = layout.dummy_segment(
        binary, max_columns=max_columns, margin=int(params.get("margin", 5))
    )
    split = (
        layout.detect_columns(binary, max_columns) if max_columns > 1 else None
    )
    page = project.load_page(page_id)
    page.regions = regions
    page.reading_order = layout.derive_reading_order(regions, split)
    project.save_page(page)


def _step_extract(project, page_id, params):
    binary = preprocess.load_binary(project.image_path(page_id, "binary"))
    page = project.load_page(page_id)
    out_dir = project.processing_dir / "regions"
    out_dir.mkdir(exist_ok=True)
    for region in page.regions:
        if region.kind != "text":
            continue
        extract = layout.extract_region(binary, region)
        preprocess.save_binary(
            extract.image, out_dir / f"{page_id}_{region.id}.bin.png"
        )


def _step_lineseg(project, page_id, params):
    binary = preprocess.load_binary(project.image_path(page_id, "binary"))
    page = project.load_page(page_id)
    for region in page.regions:
        if region.kind != "text":
            continue
        extract = layout.extract_region(binary, region)
        deskewed, angle = layout.deskew_region(extract.image)
        region.skew_applied = angle if angle else None
        lineseg.segment_lines(
            region,
            deskewed,
            min_ccs=int(params.get("min_ccs", 3)),
            noise_px=params.get("noise_px"),
            offset=extract.offset,
            deskew_angle=-angle,  # the rotation actually applied to the crop
            page_size=(page.width, page.height),
        )
    project.save_page(page)


def _line_image(page_img, line):
    from ocrflow.pagexml import Region

    shim = Region(id=line.id, polygon=line.polygon)
    return layout.extract_region(page_img, shim).image


def _step_recognize(project, page_id, params):
    models = params.get("models")
    if not models:
        raise FlowError("recognize step needs a 'models' parameter")
    if isinstance(models, str):
        models = [m for m in models.split("+") if m]
    source = params.get("source", "binary")
    page_img = (
        preprocess.load_binary(project.image_path(page_id, "binary"))
        if source == "binary"
        else preprocess.load_gray(project.image_path(page_id, "gray"))
    )
    page = project.load_page(page_id)
    registry = ModelRegistry(project.models_root)
    with LineRecognizer(registry, timeout=float(params.get("timeout", 60.0))) as rec:
        def run_model(model_id, line):
            return rec.recognize(model_id, line.id, _line_image(page_img, line))

        recognize.recognize_page(
            page,
            models,
            run_model,
            sidecar_path=project.processing_dir / f"{page_id}.pred.json",
        )
    project.save_page(page)


def _collect_eval_pairs(project, page_ids):
    pairs = []
    for pid in page_ids:
        page = project.load_page(pid)
        for region in page.regions_in_reading_order():
            for line in region.lines:
                gt = line.gt
                if gt is None:
                    continue
                ocr = None
                for key, variant in line.texts.items():
                    if key != GT_KEY:
                        ocr = variant.text
                        break
                if ocr is None:
                    continue
                pairs.append(evaluate.EvalPair(gt, ocr, f"{pid}/{line.id}"))
    return pairs


def run_evaluation(project, page_ids=None, top_k=10):
    pairs = _collect_eval_pairs(project, page_ids or project.page_ids())
    if not pairs:
        raise FlowError("no GT/OCR pairs to evaluate")
    report = evaluate.cer(pairs)
    table = evaluate.confusion_table(pairs, top_k=top_k)
    evaluate.write_eval_json(project.processing_dir / "eval.json", report, table)
    return report, table


_PAGE_STEPS = {
    "preprocess": _step_preprocess,
    "segment-dummy": _step_segment_dummy,
    "segment-manual": lambda project, page_id, params: None,
    "extract": _step_extract,
    "lineseg": _step_lineseg,
    "recognize": _step_recognize,
}


class JobRunner:
    """Tracks running and finished jobs for the HTTP service."""

    def __init__(self):
        self.jobs = {}
        self._lock = threading.Lock()

    def start(self, project, config, background=True):
        page_ids = validate_flow(project, config)
        job = JobStatus(
            job_id=uuid.uuid4().hex[:12],
            steps=list(config.steps),
            page_state={
                pid: {"state": "pending", "step": None, "reason": None}
                for pid in page_ids
            },
            started=time.time(),
        )
        with self._lock:
            self.jobs[job.job_id] = job
        if background:
            thread = threading.Thread(
                target=self._run, args=(project, config, job, page_ids), daemon=True
            )
            thread.start()
        else:
            self._run(project, config, job, page_ids)
        return job

    def get(self, job_id):
        with self._lock:
            return self.jobs.get(job_id)

    def _run(self, project, config, job, page_ids):
        threads = config.threads or None
        failed = set()
        for step in config.steps:
            t0 = time.time()
            params = config.step_params(step)
            if step in _PAGE_STEPS:
                func = _PAGE_STEPS[step]

                def run_page(pid):
                    if pid in failed:
                        return
                    job.page_state[pid].update(state="running", step=step)
                    try:
                        func(project, pid, params)
                        job.page_state[pid].update(state="done")
                    except Exception as e:
                        failed.add(pid)
                        job.page_state[pid].update(state="failed", reason=str(e))

                with ThreadPoolExecutor(max_workers=threads) as pool:
                    list(pool.map(run_page, page_ids))
            elif step == "evaluate":
                try:
                    run_evaluation(
                        project,
                        [p for p in page_ids if p not in failed],
                        top_k=int(params.get("top_k", 10)),
                    )
                except FlowError:
                    pass  # nothing to evaluate yet is not a job failure
            elif step == "results":
                project_mod.generate_results(project)
            job.timings[step] = time.time() - t0
        job.finished = time.time()


def run_flow(project, config):
    """Run a flow synchronously and return its final JobStatus."""
    return JobRunner().start(project, config, background=False)
