"""HTTP API serving the correction UI and remote automation.

JSON over HTTP; PageXML is the persisted form behind every endpoint, so
anything the API can do is equally expressible as a PageXML edit.
Saves are guarded by a revision token (hash of the stored file): a
stale token gets 409, invalid PageXML gets 422 with the validator's
diagnostics.
"""

import hashlib
import json

from fastapi import Body, FastAPI, HTTPException, Request, Response

from ocrflow import flow, layout, pagexml, preprocess
from ocrflow.engines import ModelRegistry

DEFAULT_KEYBOARD = {"name": "default", "rows": [["ſ", "æ", "œ", "ē", "ā", "q́"]]}


def _revision(data):
    return hashlib.sha1(data).hexdigest()[:12]


def create_app(project):
    app = FastAPI(title="ocrflow", version="0.1.0")
    runner = flow.JobRunner()

    def load_page_or_404(page_id):
        path = project.xml_path(page_id)
        if not path.is_file():
            raise HTTPException(404, f"unknown page {page_id!r}")
        return project.load_page(page_id)

    @app.get("/api/pages")
    def list_pages():
        pages = []
        for pid in project.page_ids():
            page = project.load_page(pid)
            pages.append(
                {
                    "id": pid,
                    "width": page.width,
                    "height": page.height,
                    "has_binary": project.image_path(pid, "binary").is_file(),
                    "has_regions": bool(page.regions),
                    "has_lines": any(r.lines for r in page.regions),
                    "has_gt": any(
                        l.gt is not None for r in page.regions for l in r.lines
                    ),
                    "revision": _revision(project.xml_path(pid).read_bytes()),
                }
            )
        return pages

    @app.get("/api/page/{page_id}/xml")
    def get_xml(page_id: str):
        path = project.xml_path(page_id)
        if not path.is_file():
            raise HTTPException(404, f"unknown page {page_id!r}")
        data = path.read_bytes()
        return Response(
            content=data,
            media_type="application/xml",
            headers={"X-Revision": _revision(data)},
        )

    @app.put("/api/page/{page_id}/xml")
    async def put_xml(page_id: str, request: Request):
        path = project.xml_path(page_id)
        if not path.is_file():
            raise HTTPException(404, f"unknown page {page_id!r}")
        token = request.headers.get("X-Revision")
        current = _revision(path.read_bytes())
        if token is not None and token != current:
            raise HTTPException(409, "page changed since it was loaded")
        body = await request.body()
        try:
            page = pagexml.parse_page(body, page_id=page_id)
        except pagexml.ValidationError as e:
            raise HTTPException(
                422, [vars(d) for d in e.diagnostics]
            )
        except pagexml.PageError as e:
            raise HTTPException(422, str(e))
        errors = [d for d in pagexml.validate(page) if d.severity == "error"]
        if errors:
            raise HTTPException(422, [vars(d) for d in errors])
        project.save_page(page)
        return {"revision": _revision(project.xml_path(page_id).read_bytes())}

    def _image_response(page_id, kind):
        path = project.image_path(page_id, kind)
        if not path.is_file():
            raise HTTPException(404, f"no {kind} image for page {page_id!r}")
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.get("/api/page/{page_id}/image")
    def get_image(page_id: str):
        return _image_response(page_id, "original")

    @app.get("/api/page/{page_id}/bin")
    def get_bin(page_id: str):
        return _image_response(page_id, "binary")

    @app.get("/api/page/{page_id}/ccs")
    def get_ccs(page_id: str):
        binary = preprocess.load_binary(project.image_path(page_id, "binary"))
        return [
            {"id": cc.id, "bbox": list(cc.bbox), "pixel_count": cc.pixel_count}
            for cc in layout.connected_components(binary)
        ]

    @app.post("/api/page/{page_id}/smear")
    def smear(page_id: str, payload: dict = Body(...)):
        cc_ids = set(payload.get("cc_ids", []))
        if not cc_ids:
            raise HTTPException(422, "cc_ids must be a nonempty list")
        binary = preprocess.load_binary(project.image_path(page_id, "binary"))
        ccs = [c for c in layout.connected_components(binary) if c.id in cc_ids]
        if not ccs:
            raise HTTPException(422, "no matching connected components")
        polygon = layout.smear_region(ccs, binary)
        return {"points": polygon.points}

    @app.post("/api/flow")
    def start_flow(payload: dict = Body(...)):
        config = flow.ProcessFlowConfig(
            steps=payload.get("steps", []),
            params=payload.get("params", {}),
            pages=payload.get("pages", "all"),
            threads=int(payload.get("threads", 0)),
        )
        try:
            job = runner.start(project, config, background=True)
        except flow.FlowError as e:
            raise HTTPException(422, str(e))
        return {"job_id": job.job_id}

    @app.get("/api/job/{job_id}")
    def job_status(job_id: str):
        job = runner.get(job_id)
        if job is None:
            raise HTTPException(404, f"unknown job {job_id!r}")
        return job.to_json()

    @app.put("/api/line/{page_id}/{line_id}/gt")
    def put_gt(page_id: str, line_id: str, payload: dict = Body(...)):
        page = load_page_or_404(page_id)
        try:
            _, line = page.line(line_id)
        except KeyError:
            raise HTTPException(404, f"unknown line {line_id!r}")
        line.set_gt(payload.get("text", ""))
        project.save_page(page)
        return {"line": line_id, "gt": line.gt}

    def keyboard_path():
        return project.root / "keyboard.json"

    @app.get("/api/keyboard")
    def get_keyboard():
        path = keyboard_path()
        if path.is_file():
            return json.loads(path.read_text())
        return DEFAULT_KEYBOARD

    @app.put("/api/keyboard")
    def put_keyboard(payload: dict = Body(...)):
        rows = payload.get("rows")
        if not isinstance(payload.get("name"), str) or not isinstance(rows, list):
            raise HTTPException(422, "keyboard needs a name and rows")
        for row in rows:
            if not isinstance(row, list) or not all(
                isinstance(g, str) and g for g in row
            ):
                raise HTTPException(422, "rows must be lists of non-empty glyphs")
        keyboard_path().write_text(
            json.dumps({"name": payload["name"], "rows": rows}, ensure_ascii=False)
        )
        return {"name": payload["name"], "rows": rows}

    @app.get("/api/eval")
    def get_eval():
        path = project.processing_dir / "eval.json"
        if not path.is_file():
            try:
                flow.run_evaluation(project)
            except flow.FlowError as e:
                raise HTTPException(404, str(e))
        return json.loads(path.read_text())

    @app.get("/api/models")
    def list_models():
        return ModelRegistry(project.models_root).list()

    return app
