"""Project directory management and final result generation.

A project lives under `<root>/data/<name>/` with `input/` (scans),
`processing/` (interim PageXML plus derived images) and `output/`
(final text). Models are shared across projects under
`<root>/models/<name>/`.
"""

import shutil
from dataclasses import dataclass
from pathlib import Path

from PIL import Image

from ocrflow import pagexml, pdfpages

IMAGE_SUFFIXES = (".png", ".tif", ".tiff", ".jpg", ".jpeg")


class ProjectError(Exception):
    pass


@dataclass
class Project:
    root: Path  # <root>/data/<name>
    models_root: Path

    @property
    def name(self):
        return self.root.name

    @property
    def input_dir(self):
        return self.root / "input"

    @property
    def processing_dir(self):
        return self.root / "processing"

    @property
    def output_dir(self):
        return self.root / "output"

    def page_ids(self):
        return sorted(p.stem for p in self.processing_dir.glob("*.xml"))

    def xml_path(self, page_id):
        return self.processing_dir / f"{page_id}.xml"

    def image_path(self, page_id, kind="original"):
        suffix = {"original": ".png", "binary": ".bin.png", "gray": ".nrm.png"}[kind]
        return self.processing_dir / f"{page_id}{suffix}"

    def load_page(self, page_id):
        return pagexml.parse_page(self.xml_path(page_id).read_bytes(), page_id=page_id)

    def save_page(self, page):
        # write-to-temp + rename keeps a killed job from leaving a torn file
        data = pagexml.serialize_page(page)
        target = self.xml_path(page.id)
        tmp = target.with_suffix(".xml.tmp")
        tmp.write_bytes(data)
        tmp.replace(target)


def open_project(root, name, models_root=None):
    root = Path(root)
    return Project(root / "data" / name, Path(models_root or root / "models"))


def init_project(root, name, models_root=None):
    """Register input scans as pages with stable zero-padded ids.

    PDFs are exploded into per-page images. Every page gets a skeleton
    PageXML beside a normalized PNG copy of its scan. Unreadable files
    fail individually without aborting the project.
    """
    project = open_project(root, name, models_root)
    if not project.input_dir.is_dir() or not any(project.input_dir.iterdir()):
        raise ProjectError(f"input folder {project.input_dir} is empty")
    project.processing_dir.mkdir(parents=True, exist_ok=True)
    project.output_dir.mkdir(parents=True, exist_ok=True)
    project.models_root.mkdir(parents=True, exist_ok=True)

    sources = []  # (sort key, PIL image loader)
    failures = {}
    for path in sorted(project.input_dir.iterdir()):
        if path.suffix.lower() == ".pdf":
            try:
                for i, img in enumerate(pdfpages.extract_page_images(path)):
                    sources.append((f"{path.name}#{i:04d}", img))
            except pdfpages.PdfError as e:
                failures[path.name] = str(e)
        elif path.suffix.lower() in IMAGE_SUFFIXES:
            try:
                sources.append((path.name, Image.open(path).copy()))
            except OSError as e:
                failures[path.name] = str(e)

    sources.sort(key=lambda t: t[0])
    if not sources and not failures:
        raise ProjectError(f"no images or PDFs in {project.input_dir}")

    page_ids = []
    for seq, (_, img) in enumerate(sources, start=1):
        page_id = f"{seq:04d}"
        img.convert("L").save(project.image_path(page_id, "original"))
        w, h = img.size
        page = pagexml.Page(
            id=page_id, width=w, height=h, image_original=f"{page_id}.png"
        )
        project.save_page(page)
        page_ids.append(page_id)
    return project, page_ids, failures


def generate_results(project):
    """Emit output/<page-id>.txt and output/book.txt.

    Per line GT wins over OCR; lines are joined within a region, regions
    follow the reading order, pages the book order. PageXML is copied to
    the output as the full-fidelity form.
    """
    page_ids = project.page_ids()
    if not page_ids:
        raise ProjectError("project has no pages")
    project.output_dir.mkdir(parents=True, exist_ok=True)
    book_parts = []
    for page_id in page_ids:
        page = project.load_page(page_id)
        region_texts = []
        for region in page.regions_in_reading_order():
            lines = [l.best_text for l in region.lines if l.best_text is not None]
            if lines:
                region_texts.append("\n".join(lines))
        text = "\n".join(region_texts)
        (project.output_dir / f"{page_id}.txt").write_text(
            text + ("\n" if text else ""), encoding="utf-8"
        )
        shutil.copyfile(project.xml_path(page_id), project.output_dir / f"{page_id}.xml")
        book_parts.append(text + ("\n" if text else ""))
    (project.output_dir / "book.txt").write_text("".join(book_parts), encoding="utf-8")
    return [project.output_dir / f"{p}.txt" for p in page_ids]


def _unique_name(models_root, name):
    candidate = name
    suffix = 0
    while (models_root / candidate).exists():
        suffix += 1
        candidate = f"{name}_{suffix}"
    return candidate


def import_model(models_root, source, name=None):
    """Copy an external model directory into the shared models root."""
    source = Path(source)
    if not (source / "engine.json").is_file() and not (source / "result.json").is_file():
        raise ProjectError(
            f"{source} does not look like a model directory "
            "(no engine.json or result.json)"
        )
    models_root = Path(models_root)
    models_root.mkdir(parents=True, exist_ok=True)
    final = _unique_name(models_root, name or source.name)
    shutil.copytree(source, models_root / final)
    return final


def export_model(models_root, name, target):
    source = Path(models_root) / name
    if not source.is_dir():
        raise ProjectError(f"unknown model {name!r}")
    target = Path(target)
    shutil.copytree(source, target / name)
    return target / name
