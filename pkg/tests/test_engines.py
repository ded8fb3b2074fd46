import base64
import io
import json
import sys

import numpy as np
import pytest
from PIL import Image

from ocrflow.engines import (
    EngineProcess,
    EngineSpec,
    LineRecognizer,
    ModelRegistry,
    RecognizerError,
    image_to_png_b64,
    parse_matrix_reply,
    parse_text_reply,
)
from ocrflow.recognize import ProtocolError
from ocrflow.preprocess import BinaryImage, GrayImage


def _register(models_root, name, fixture, mode="text", extra_args=()):
    model_dir = models_root / name
    model_dir.mkdir(parents=True)
    fixture_path = model_dir / "fixture.json"
    fixture_path.write_text(json.dumps(fixture, ensure_ascii=False))
    (model_dir / "engine.json").write_text(
        json.dumps(
            {
                "cmd": [
                    sys.executable,
                    "-m",
                    "ocrflow.engines.echo",
                    "--fixture",
                    "{model_dir}/fixture.json",
                    *extra_args,
                ],
                "mode": mode,
            }
        )
    )
    return model_dir


def _line_image(width=40, height=16):
    bits = np.zeros((height, width), dtype=np.uint8)
    bits[4:12, 2 : width - 2] = 1
    return BinaryImage(bits)


def test_image_to_png_b64_round_trip():
    binary = _line_image()
    img = Image.open(io.BytesIO(base64.b64decode(image_to_png_b64(binary))))
    assert img.size == (40, 16)
    arr = np.asarray(img.convert("L"))
    assert np.array_equal(arr < 128, binary.bits.astype(bool))
    gray = GrayImage(np.linspace(0, 1, 100).reshape(10, 10))
    img = Image.open(io.BytesIO(base64.b64decode(image_to_png_b64(gray))))
    assert img.size == (10, 10)


def test_registry_lists_and_resolves(tmp_path):
    _register(tmp_path, "m1", {"default": "a"})
    _register(tmp_path, "m2", {"default": "b"})
    (tmp_path / "not_a_model").mkdir()
    registry = ModelRegistry(tmp_path)
    assert registry.list() == ["m1", "m2"]
    spec = registry.get("m1")
    assert spec.mode == "text"
    assert str(tmp_path / "m1" / "fixture.json") in spec.cmd
    with pytest.raises(RecognizerError):
        registry.get("missing")


def test_text_mode_recognition(tmp_path):
    _register(tmp_path, "m1", {"default": "abc", "lines": {"special": "xyz"}})
    with LineRecognizer(ModelRegistry(tmp_path)) as rec:
        pred = rec.recognize("m1", "l1", _line_image())
        assert pred.text == "abc"
        assert pred.model_id == "m1"
        assert [c.glyph for c in pred.chars] == list("abc")
        assert all(0 <= c.confidence <= 1 for c in pred.chars)
        assert rec.recognize("m1", "special", _line_image()).text == "xyz"


def test_matrix_mode_recognition(tmp_path):
    _register(tmp_path, "m1", {"default": "ab"}, mode="matrix")
    with LineRecognizer(ModelRegistry(tmp_path)) as rec:
        pred = rec.recognize("m1", "l1", _line_image(width=64))
        assert pred.text == "ab"
        assert pred.model_id == "m1"


def test_matrix_mode_rejects_bad_row_sums(tmp_path):
    _register(
        tmp_path, "m1", {"default": "ab"}, mode="matrix", extra_args=("--bad-rows",)
    )
    with LineRecognizer(ModelRegistry(tmp_path)) as rec:
        with pytest.raises(ProtocolError):
            rec.recognize("m1", "l1", _line_image(width=64))


def test_engine_crash_reports_stderr():
    spec = EngineSpec(
        "broken", [sys.executable, "-c", "import sys; sys.exit('boom')"], "text"
    )
    proc = EngineProcess(spec)
    with pytest.raises(RecognizerError) as e:
        proc.request("l1", "aGk=", "text")
    assert "boom" in str(e.value)
    proc.close()


def test_reply_id_mismatch_is_protocol_error():
    spec = EngineSpec(
        "liar",
        [
            sys.executable,
            "-c",
            "import sys,json\n"
            "for line in sys.stdin:\n"
            "    print(json.dumps({'id': 'wrong', 'text': 'x'}), flush=True)",
        ],
        "text",
    )
    proc = EngineProcess(spec)
    with pytest.raises(ProtocolError):
        proc.request("l1", "aGk=", "text")
    proc.close()


def test_parse_matrix_reply_validation():
    good = {
        "matrix": {"labels": ["", "a"], "rows": [[0.5, 0.5]] * 4}
    }
    matrix, alphabet = parse_matrix_reply(good, line_width=16)
    assert matrix.T == 4 and alphabet.labels == ["", "a"]
    with pytest.raises(ProtocolError):
        parse_matrix_reply({"text": "no matrix"})
    with pytest.raises(ProtocolError):
        parse_matrix_reply({"matrix": {"labels": [], "rows": []}})
    with pytest.raises(ProtocolError):  # labels/columns mismatch
        parse_matrix_reply({"matrix": {"labels": ["", "a", "b"], "rows": [[0.5, 0.5]]}})
    with pytest.raises(ProtocolError):  # T != W/4
        parse_matrix_reply(good, line_width=40)


def test_parse_text_reply_validation():
    payload = {
        "text": "ab",
        "chars": [
            {"g": "a", "c": 0.9, "x0": 0, "x1": 4, "alts": [["a", 0.9]]},
            {"g": "b", "c": 0.8, "x0": 4, "x1": 8},
        ],
    }
    pred = parse_text_reply(payload, "m")
    assert pred.text == "ab" and pred.chars[0].alternatives == [("a", 0.9)]
    with pytest.raises(ProtocolError):
        parse_text_reply({"chars": []}, "m")
    with pytest.raises(ProtocolError):  # glyphs must concatenate to the text
        parse_text_reply(
            {"text": "ab", "chars": [{"g": "x", "c": 0.5, "x0": 0, "x1": 1}]}, "m"
        )
    with pytest.raises(ProtocolError):  # confidence outside [0,1]
        parse_text_reply(
            {"text": "a", "chars": [{"g": "a", "c": 1.5, "x0": 0, "x1": 1}]}, "m"
        )


def test_one_process_per_model_is_reused(tmp_path):
    _register(tmp_path, "m1", {"default": "a"})
    rec = LineRecognizer(ModelRegistry(tmp_path))
    try:
        rec.recognize("m1", "l1", _line_image())
        proc = rec._procs["m1"]
        rec.recognize("m1", "l2", _line_image())
        assert rec._procs["m1"] is proc
    finally:
        rec.close()
    assert rec._procs == {}
