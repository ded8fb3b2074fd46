"""Ground-truth pool, cross-fold planning, and the iterative training loop.

Training itself happens in an external trainer process driven through a
JSON job file; this module owns everything around it: arranging the GT
pool into folds for a voting ensemble, deriving early-stopping settings
from the amount of data, naming and registering the resulting models,
and keeping the per-iteration ledger that the speedup arithmetic in
``evaluate`` consumes.
"""

import json
import random
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from ocrflow import evaluate


class TrainingError(Exception):
    pass


@dataclass
class GTEntry:
    line_id: str
    page_id: str
    image_ref: str
    transcription: str
    iteration_added: int = 0


@dataclass
class GTPool:
    entries: list = field(default_factory=list)
    eval_ids: set = field(default_factory=set)

    def add(self, entry):
        if any(e.line_id == entry.line_id for e in self.entries):
            raise TrainingError(f"duplicate line id {entry.line_id!r}")
        self.entries.append(entry)

    def training_entries(self):
        return [e for e in self.entries if e.line_id not in self.eval_ids]

    def eval_entries(self):
        return [e for e in self.entries if e.line_id in self.eval_ids]


@dataclass
class FoldPlan:
    n_folds: int
    assignment: list  # per fold: (train ids, validation ids)
    seed: int


@dataclass
class EarlyStopping:
    check_every_iters: int
    patience_checks: int
    max_iters: int


@dataclass
class TrainingConfig:
    n_voters: int = 5
    pretrain_mode: str = "scratch"  # "scratch" | "same_base" | "per_fold"
    base_model: str = None
    per_fold_models: list = None
    augmentation_factor: float = 0.0
    two_step_refine: bool = False
    seed: int = 42

    def __post_init__(self):
        if self.pretrain_mode == "per_fold":
            if not self.per_fold_models or len(self.per_fold_models) != self.n_voters:
                raise TrainingError(
                    "per-fold pretraining needs exactly one base model per voter"
                )


@dataclass
class IterationRecord:
    iteration: int
    pages_added: int
    lines_added: int
    correction_minutes: float
    cer_new_data: float
    cer_eval: float
    pool_pages: int
    pool_lines: int
    seconds_per_line: float = None
    model_ids: list = field(default_factory=list)
    seed: int = 0

    def to_json(self):
        return vars(self)


def partition_folds(pool, n, seed=42, holdout_fraction=0.1):
    """Shuffle the pool with a recorded seed and slice it into n folds.

    Fold i validates on slice i and trains on all the others. With a
    single fold (no cross-validation possible) the last 10% is held out
    for validation instead.
    """
    entries = pool.training_entries()
    if len(entries) < n:
        raise TrainingError(f"{len(entries)} entries cannot fill {n} folds")
    ids = [e.line_id for e in entries]
    rng = random.Random(seed)
    rng.shuffle(ids)

    if n == 1:
        cut = max(1, int(round(len(ids) * holdout_fraction)))
        return FoldPlan(1, [(ids[:-cut], ids[-cut:])], seed)

    base = len(ids) // n
    extra = len(ids) % n
    slices = []
    pos = 0
    for i in range(n):
        size = base + (1 if i < extra else 0)
        slices.append(ids[pos : pos + size])
        pos += size
    assignment = []
    for i in range(n):
        train = [x for j, s in enumerate(slices) if j != i for x in s]
        assignment.append((train, slices[i]))
    return FoldPlan(n, assignment, seed)


def derive_training_params(n_lines, patience_checks=5):
    """Early-stopping settings scaled to the amount of training data.

    Monotone in n_lines: more data never shortens the check interval.
    """
    if n_lines < 1:
        raise TrainingError("need at least one training line")
    check_every = max(100, n_lines)
    return EarlyStopping(check_every, patience_checks, 100 * check_every)


def name_model(project, iteration, fold, existing=()):
    """`<project>_it<NN>_fold<F>`, numeric suffix on collision."""
    base = f"{project}_it{iteration:02d}_fold{fold}"
    name = base
    suffix = 0
    while name in existing:
        suffix += 1
        name = f"{base}_{suffix}"
    return name


@dataclass
class TrainerHandle:
    """External trainer invocation: `cmd <job.json>`.

    The trainer reads the job file, writes a model directory at
    job["out"] plus a result.json `{"val_cer": float, "iters": int}`.
    """

    cmd: list
    timeout: float = 3600.0

    def run(self, job, job_path):
        job_path.write_text(json.dumps(job, ensure_ascii=False, indent=2))
        result = subprocess.run(
            [*self.cmd, str(job_path)],
            capture_output=True,
            text=True,
            timeout=self.timeout,
        )
        if result.returncode != 0:
            raise TrainingError(
                f"trainer failed (exit {result.returncode}): {result.stderr.strip()}"
            )
        result_path = Path(job["out"]) / "result.json"
        if not result_path.is_file():
            raise TrainingError(f"trainer wrote no result.json in {job['out']}")
        return json.loads(result_path.read_text())


class IterationLedger:
    def __init__(self, path):
        self.path = Path(path)
        self.records = []
        if self.path.is_file():
            data = json.loads(self.path.read_text())
            self.records = [IterationRecord(**r) for r in data]

    def append(self, record):
        if self.records and record.pool_lines <= self.records[-1].pool_lines:
            raise TrainingError("GT pool must grow between iterations")
        self.records.append(record)
        self.save()

    def save(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps([r.to_json() for r in self.records], indent=2))
        tmp.replace(self.path)


def audit_eval_hygiene(pool, plans):
    """Line ids appearing both in the eval set and any training split."""
    leaked = set()
    for plan in plans:
        for train_ids, _ in plan.assignment:
            leaked |= pool.eval_ids & set(train_ids)
    return sorted(leaked)


def run_iteration(
    pool,
    config,
    project,
    iteration,
    trainer,
    models_root,
    work_dir,
    ledger,
    new_entries,
    correction_minutes,
    cer_new_data=None,
    evaluate_ensemble=None,
):
    """One turn of the iterative loop: fold, train, register, evaluate.

    `new_entries` is the GT transcribed/corrected since the previous
    iteration (must be nonempty); they join the pool before folding so
    every model trains on all GT produced so far. `evaluate_ensemble`,
    when given, maps the new model ids to a CER on the eval set.
    """
    if not new_entries:
        raise TrainingError("no new GT since the last iteration")
    for entry in new_entries:
        entry.iteration_added = iteration
        pool.add(entry)

    plan = partition_folds(pool, config.n_voters, seed=config.seed + iteration)
    leaked = audit_eval_hygiene(pool, [plan])
    if leaked:
        raise TrainingError(f"eval lines leaked into training: {leaked}")
    params = derive_training_params(
        min(len(train) for train, _ in plan.assignment)
    )

    models_root = Path(models_root)
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    existing = {p.name for p in models_root.iterdir()} if models_root.is_dir() else set()
    by_id = {e.line_id: e for e in pool.entries}
    model_ids = []
    trained = []
    try:
        for fold, (train_ids, val_ids) in enumerate(plan.assignment):
            name = name_model(project, iteration, fold, existing)
            existing.add(name)
            out_dir = models_root / name
            base = None
            if config.pretrain_mode == "same_base":
                base = str(models_root / config.base_model)
            elif config.pretrain_mode == "per_fold":
                base = str(models_root / config.per_fold_models[fold])
            job = {
                "train": [
                    {"image": by_id[i].image_ref, "text": by_id[i].transcription}
                    for i in train_ids
                ],
                "val": [
                    {"image": by_id[i].image_ref, "text": by_id[i].transcription}
                    for i in val_ids
                ],
                "base_model": base,
                "augmentation": config.augmentation_factor,
                "early_stopping": vars(params),
                "out": str(out_dir),
            }
            trained.append(out_dir)  # tracked first so a failed run is cleaned up
            trainer.run(job, work_dir / f"job_it{iteration:02d}_fold{fold}.json")
            if config.two_step_refine and config.augmentation_factor > 0:
                refine = dict(job, augmentation=0.0, base_model=str(out_dir))
                trainer.run(
                    refine, work_dir / f"job_it{iteration:02d}_fold{fold}_refine.json"
                )
            model_ids.append(name)
    except TrainingError:
        # abort the iteration: drop any partially produced models
        import shutil

        for out_dir in trained:
            shutil.rmtree(out_dir, ignore_errors=True)
        raise

    cer_eval = None
    if evaluate_ensemble is not None and pool.eval_entries():
        cer_eval = evaluate_ensemble(model_ids)

    pages = {e.page_id for e in pool.entries if e.line_id not in pool.eval_ids}
    record = IterationRecord(
        iteration=iteration,
        pages_added=len({e.page_id for e in new_entries}),
        lines_added=len(new_entries),
        correction_minutes=correction_minutes,
        cer_new_data=cer_new_data,
        cer_eval=cer_eval,
        pool_pages=len(pages),
        pool_lines=len(pool.training_entries()),
        model_ids=model_ids,
        seed=plan.seed,
    )
    ledger.append(record)
    return record


def project_correction_times(records):
    """(ITA minutes, MM minutes) for the speedup comparison.

    ITA is the correction time actually spent across iterations; MM
    projects correcting the whole pool at the iteration-1 seconds-per-
    line rate of the mixed model.
    """
    if not records:
        raise ValueError("no iteration records")
    first = records[0]
    if first.seconds_per_line:
        rate_minutes = first.seconds_per_line / 60.0
    elif first.lines_added and first.correction_minutes:
        rate_minutes = first.correction_minutes / first.lines_added
    else:
        raise ValueError("iteration 1 lacks a per-line correction rate")
    ita = sum(r.correction_minutes for r in records)
    total_lines = records[-1].pool_lines
    mm = total_lines * rate_minutes
    return ita, round(mm)


def speedup_report(records):
    ita, mm = project_correction_times(records)
    return evaluate.speedup(ita, mm)
