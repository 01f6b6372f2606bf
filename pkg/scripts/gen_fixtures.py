#!/usr/bin/env python3
"""Generate the seeded fixture networks, samples, and golden files.

Run once from the repository root; outputs are committed. Golden forward
values come from the loop-based evaluator in tests/oracles.py, not from the
package, so they stay an independent reference.
"""
import hashlib
import json
import os
import sys

import numpy as np

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, "tests"))
sys.path.insert(0, os.path.join(ROOT, "src"))

from oracles import forward_pure, argmax_pure, grid_violation  # noqa: E402

DATA = os.path.join(ROOT, "src", "specground", "data")
FIXTURES = os.path.join(ROOT, "tests", "fixtures")
GOLDEN = os.path.join(ROOT, "tests", "golden")


def dump(obj, path):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")
    print("wrote", os.path.relpath(path, ROOT))


def random_net_dict(rng, widths, scale=1.0):
    layers = []
    for i, (din, dout) in enumerate(zip(widths, widths[1:])):
        w = rng.standard_normal((dout, din)) * (scale / np.sqrt(din))
        b = rng.standard_normal(dout) * 0.1
        act = "none" if i == len(widths) - 2 else "relu"
        layers.append({
            "weights": [[float(v) for v in row] for row in w],
            "bias": [float(v) for v in b],
            "activation": act,
        })
    return {"input_dim": widths[0], "layers": layers}


def np_forward(net_dict, x):
    a = np.asarray(x, dtype=np.float64)
    for layer in net_dict["layers"]:
        a = np.array(layer["weights"]) @ a + np.array(layer["bias"])
        if layer["activation"] == "relu":
            a = np.maximum(a, 0.0)
    return a


class _NetView:
    """Minimal adapter so oracle helpers accept a net dict."""

    def __init__(self, net_dict):
        class L:
            pass

        self.layers = []
        for spec in net_dict["layers"]:
            layer = L()
            layer.weights = np.array(spec["weights"])
            layer.bias = np.array(spec["bias"])
            layer.activation = spec["activation"]
            self.layers.append(layer)


def sha(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---- credit benchmark -----------------------------------------------------------

def gen_credit():
    applicant = {
        "kind": "tabular_vector",
        # duration 24mo, amount 2500, installment 3, residence 2, age 35,
        # credits 1, dependents 1 - normalized by the schema's raw ranges
        "values": [
            round((24 - 4) / 68, 6),
            round((2500 - 250) / 18174, 6),
            round((3 - 1) / 3, 6),
            round((2 - 1) / 3, 6),
            round((35 - 19) / 56, 6),
            0.0,
            0.0,
        ],
        "shape": [7],
        "id": "applicant_001",
    }
    age_upper = (50 - 19) / (75 - 19)
    chosen = None
    for seed in range(200):
        rng = np.random.default_rng(seed)
        net = random_net_dict(rng, [7, 8, 8, 2], scale=1.4)
        target = int(np.argmax(np_forward(net, applicant["values"])))
        lower = np.array(applicant["values"], dtype=np.float64)
        upper = lower.copy()
        lower[4], upper[4] = 0.0, age_upper
        violation = grid_violation(_NetView(net), lower, upper, target, resolution=1e-3)
        if violation is not None:
            chosen = (seed, net, target)
            break
    seed, net, target = chosen
    print(f"credit net: seed={seed}, target class={target}, age box is falsifiable")
    dump(net, os.path.join(DATA, "credit_net.json"))
    dump(applicant, os.path.join(DATA, "credit_applicant.json"))


# ---- image benchmark --------------------------------------------------------------

BEAK_BOX = (2, 4, 6, 8)  # x1, y1, x2, y2 on the 16x16 fixture image


def gen_image():
    h = w = 16
    yy, xx = np.mgrid[0:h, 0:w]
    img = 0.35 + 0.3 * (yy / (h - 1))          # soft vertical gradient
    img[5:12, 5:13] = 0.75                      # body
    img[4:8, 2:6] = 0.9                         # head/beak blob (the detected region)
    img = np.clip(np.round(img, 4), 0.0, 1.0)
    sample = {
        "kind": "image_grayscale",
        "values": [float(v) for v in img.ravel()],
        "shape": [h, w],
        "id": "bird_0001",
    }

    chosen = None
    for seed in range(200):
        rng = np.random.default_rng(1000 + seed)
        net = random_net_dict(rng, [h * w, 12, 12, 4], scale=1.2)
        target = int(np.argmax(np_forward(net, sample["values"])))
        masked = img.copy()
        x1, y1, x2, y2 = BEAK_BOX
        masked[y1:y2, x1:x2] = 0.0
        flipped = int(np.argmax(np_forward(net, masked.ravel()))) != target
        if flipped:
            chosen = (1000 + seed, net, target)
            break
    seed, net, target = chosen
    print(f"image net: seed={seed}, target class={target}, masking flips the class")
    dump(net, os.path.join(FIXTURES, "image_net_16x16.json"))
    dump(sample, os.path.join(FIXTURES, "bird_16x16.json"))

    x1, y1, x2, y2 = BEAK_BOX
    cx, cy = (x1 + x2) / 2 / w, (y1 + y2) / 2 / h
    bw, bh = (x2 - x1) / w, (y2 - y1) / h
    det = {"cx": cx, "cy": cy, "w": bw, "h": bh,
           "box_score": 0.42, "text_score": 0.31, "phrase": "beak"}
    fixture = {}
    for mode in ("tight", "loose"):
        fixture[f"bird_0001|beak|{mode}"] = {"detections": [det]}
    dump(fixture, os.path.join(FIXTURES, "detector_fixture.json"))


# ---- golden forward outputs ---------------------------------------------------------

def gen_forward_golden():
    rng = np.random.default_rng(7)
    net = random_net_dict(rng, [5, 6, 5, 3], scale=1.0)
    x = [0.12, 0.93, 0.4, 0.55, 0.08]
    y = forward_pure(net["layers"], x)
    dump(net, os.path.join(FIXTURES, "forward_net_3layer.json"))
    dump({"input": x, "expected_output": y, "expected_argmax": argmax_pure(y)},
         os.path.join(GOLDEN, "forward_golden.json"))


# ---- recorded chat-model replies ------------------------------------------------------

EXAMPLE_PROMPTS = {
    "beak_tail": "check that the bird is classified correctly if both the beak and the tail are missing.",
    "cars": "Check that the classification of the pedestrian is correct even if the cars are not clear.",
    "wheels": "is it possible that the car is misclassified when the brightness of its front wheels is increased?",
    "dependents": "Could I get the loan if I had fewer dependents?",
}


def gen_llm_fixtures():
    for mode, wheels in (("detailed", "front wheels"), ("minimal", "wheels")):
        table = {
            sha(EXAMPLE_PROMPTS["beak_tail"]):
                '{\n  "object": "beak . tail",\n  "action": "remove"\n}',
            sha(EXAMPLE_PROMPTS["cars"]):
                '```json\n{\n  "object": "cars",\n  "action": "add_noise"\n}\n```',
            sha(EXAMPLE_PROMPTS["wheels"]):
                '{\n  "object": "%s",\n  "action": "increase_brightness"\n}' % wheels,
            sha(EXAMPLE_PROMPTS["dependents"]):
                '```json\n{\n  "attribute": "Attribute18",\n  "action": "decrease"\n}\n```',
        }
        dump(table, os.path.join(FIXTURES, f"llm_fixture_{mode}.json"))


# ---- parse eval fixtures (20 visual prompts) ------------------------------------------

PARSE_EVAL = [
    # (prompt, expected_objects, expected_action)
    ("check that the bird is classified correctly if both the beak and the tail are missing.",
     ["beak", "tail"], "remove"),
    ("Check that the classification of the pedestrian is correct even if the cars are not clear.",
     ["cars"], "add_noise"),
    ("is it possible that the car is misclassified when the brightness of its front wheels is increased?",
     ["front wheels"], "increase_brightness"),
    # hand label disagrees with the rule backend here (phrase granularity)
    ("Can the prediction change if all the purple thorns in the image are partially occluded?",
     ["purple thorns"], "remove"),
    ("Can the prediction change if the purple thorn in the bottom is noisier?",
     ["purple thorn in the bottom"], "add_noise"),
    ("Does the label stay the same when the left wing is darker?",
     ["left wing"], "decrease_brightness"),
    ("Is the truck still recognized if the road signs are blurry?",
     ["road signs"], "add_noise"),
    ("Will the diagnosis hold if the lesion is brighter?",
     ["lesion"], "increase_brightness"),
    ("check the dog is detected when its collar is hidden.",
     ["collar"], "remove"),
    ("does the classification persist if the headlights are removed?",
     ["headlights"], "remove"),
    # hand label disagrees with the rule backend on the action here
    ("Check that the boat is classified correctly even if the sail is washed out.",
     ["sail"], "add_noise"),
    ("Is the cat recognized when the whiskers and the ears are masked?",
     ["whiskers", "ears"], "remove"),
    # hand label disagrees with the rule backend here (phrase granularity)
    ("Could the output differ when the background is grainy?",
     ["scene background"], "add_noise"),
    ("Is the sign readable if its border has more contrast?",
     ["border"], "increase_contrast"),
    ("Check the plane is classified correctly while the wings are dimmer.",
     ["wings"], "decrease_brightness"),
    ("Would the bird be misidentified if the red crest is erased?",
     ["red crest"], "remove"),
    ("Does the model still see the zebra when the stripes are less clear?",
     ["stripes"], "add_noise"),
    ("Is the flower classified the same if the petals are brightened?",
     ["petals"], "increase_brightness"),
    ("Check that the owl is identified when the eyes are enlarged.",
     ["eyes"], "scale_up"),
    ("Verify the handwriting is read correctly if the strokes are fuzzy.",
     ["strokes"], "add_noise"),
]

# replies for the replay table; a few deliberately differ from the labels
LLM_EVAL_REPLIES = {
    4: ('{"object": "purple thorn", "action": "add_noise"}', "objects wrong"),
    8: ('{"object": "dog collar", "action": "remove"}', "objects wrong"),
    11: ('{"object": "whiskers", "action": "remove"}', "objects wrong"),
    10: ('{"object": "sail", "action": "decrease_contrast"}', "action wrong"),
    19: ('{"object": "strokes", "action": "remove"}', "action wrong"),
}


def gen_parse_eval():
    items = [
        {"prompt": p, "expected_objects": objs, "expected_action": act}
        for p, objs, act in PARSE_EVAL
    ]
    dump({"items": items}, os.path.join(FIXTURES, "parse_eval_items.json"))

    # the canonical example prompts, split by template family
    visual = [
        {"prompt": EXAMPLE_PROMPTS["cars"], "expected_objects": ["cars"],
         "expected_action": "add_noise"},
        {"prompt": EXAMPLE_PROMPTS["beak_tail"], "expected_objects": ["beak", "tail"],
         "expected_action": "remove"},
        {"prompt": EXAMPLE_PROMPTS["wheels"], "expected_objects": ["front wheels"],
         "expected_action": "increase_brightness"},
    ]
    dump({"items": visual}, os.path.join(FIXTURES, "parse_golden_visual.json"))
    visual_min = [dict(v) for v in visual]
    visual_min[2]["expected_objects"] = ["wheels"]
    dump({"items": visual_min}, os.path.join(FIXTURES, "parse_golden_visual_minimal.json"))
    tabular = [
        {"prompt": EXAMPLE_PROMPTS["dependents"], "expected_objects": ["Attribute18"],
         "expected_action": "decrease"},
    ]
    dump({"items": tabular}, os.path.join(FIXTURES, "parse_golden_tabular.json"))

    table = {}
    for i, (prompt, objs, act) in enumerate(PARSE_EVAL):
        if i in LLM_EVAL_REPLIES:
            reply = LLM_EVAL_REPLIES[i][0]
        else:
            reply = json.dumps({"object": " . ".join(objs), "action": act})
        table[sha(prompt)] = reply
    dump(table, os.path.join(FIXTURES, "parse_eval_llm_responses.json"))


# ---- detection eval fixtures (20 labeled images) ----------------------------------------

LABELED_BOX = [4, 4, 12, 12]
GOOD = {"cx": 0.5, "cy": 0.5, "w": 0.5, "h": 0.5}
INNER = {"cx": 0.5, "cy": 0.5, "w": 0.125, "h": 0.125}
OFF = {"cx": 0.125, "cy": 0.125, "w": 0.25, "h": 0.25}


def _det(geom, box_score, text_score, phrase):
    d = dict(geom)
    d.update({"box_score": box_score, "text_score": text_score, "phrase": phrase})
    return d


def gen_detect_eval():
    items = []
    responses = {}

    def add(idx, per_query):
        image_id = f"img{idx:02d}"
        queries = {"detailed": f"the marked part {idx}", "minimal": f"part {idx}"}
        items.append({
            "image_id": image_id, "width": 16, "height": 16,
            "queries": queries,
            "labeled_boxes": [{"label": f"part {idx}", "box": LABELED_BOX}],
        })
        for parse_mode, dets in per_query.items():
            if dets is None:
                continue  # no fixture entry: the detector comes back empty
            for mode in ("tight", "loose"):
                key = f"{image_id}|{queries[parse_mode]}|{mode}"
                responses[key] = {"detections": dets}

    strong = [_det(GOOD, 0.9, 0.9, "part")]
    weak = [_det(GOOD, 0.2, 0.2, "part")]
    faint = [_det(GOOD, 0.1, 0.1, "part")]
    nested = [_det(GOOD, 0.9, 0.9, "part"), _det(INNER, 0.2, 0.2, "part")]
    misplaced = [_det(OFF, 0.9, 0.9, "part")]

    for i in range(0, 9):                       # all four configurations succeed
        add(i, {"detailed": strong, "minimal": strong})
    for i in range(9, 13):                      # only the loose configurations
        add(i, {"detailed": weak, "minimal": weak})
    add(13, {"detailed": faint, "minimal": weak})   # only (minimal, loose)
    add(14, {"detailed": misplaced, "minimal": misplaced})  # IoU failure everywhere
    for i in (15, 16):                          # scores below every threshold
        add(i, {"detailed": faint, "minimal": faint})
    for i in (17, 18):                          # pruning kills the loose match
        add(i, {"detailed": nested, "minimal": nested})
    add(19, {"detailed": strong, "minimal": None})  # minimal query finds nothing

    dump({"items": items}, os.path.join(FIXTURES, "detect_eval_items.json"))
    dump(responses, os.path.join(FIXTURES, "detect_eval_responses.json"))


# ---- golden queries ------------------------------------------------------------------

def gen_vnnlib_goldens():
    from specground.core import GroundedSpec, InputSample, Network, load_network
    from specground.specgen import emit_vnnlib

    # 2-in/2-out degenerate point spec
    rng = np.random.default_rng(21)
    net2 = random_net_dict(rng, [2, 3, 2], scale=1.0)
    dump(net2, os.path.join(FIXTURES, "net_2in_2out.json"))
    ref = InputSample("tabular_vector", [0.25, 0.75], (2,), "pt")
    spec = GroundedSpec(np.array([0.25, 0.75]), np.array([0.25, 0.75]), ref, 0)
    net = Network.from_dict(net2)
    _write_text(emit_vnnlib(spec, net), "degenerate_2in.vnnlib")

    # 1-in/2-out with a single competitor disjunct
    net1 = {
        "input_dim": 1,
        "layers": [{"weights": [[1.0], [-1.0]], "bias": [0.0, 1.0], "activation": "none"}],
    }
    dump(net1, os.path.join(FIXTURES, "net_1in_2out.json"))
    ref1 = InputSample("tabular_vector", [0.8], (1,), "pt1")
    spec1 = GroundedSpec(np.array([0.1]), np.array([0.9]), ref1, 0)
    _write_text(emit_vnnlib(spec1, Network.from_dict(net1)), "single_competitor.vnnlib")

    # the credit example: free age coordinate
    net_c = load_network(os.path.join(DATA, "credit_net.json"))
    with open(os.path.join(DATA, "credit_applicant.json")) as fh:
        applicant = InputSample.from_dict(json.load(fh))
    lower = np.array(applicant.values)
    upper = lower.copy()
    lower[4], upper[4] = 0.0, (50 - 19) / (75 - 19)
    target = int(np.argmax(np_forward(net_c.to_dict(), applicant.values)))
    spec_c = GroundedSpec(lower, upper, applicant, target)
    _write_text(emit_vnnlib(spec_c, net_c), "credit_age.vnnlib")


def _write_text(text, name):
    os.makedirs(GOLDEN, exist_ok=True)
    path = os.path.join(GOLDEN, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    print("wrote", os.path.relpath(path, ROOT))


if __name__ == "__main__":
    gen_credit()
    gen_image()
    gen_forward_golden()
    gen_llm_fixtures()
    gen_parse_eval()
    gen_detect_eval()
    gen_vnnlib_goldens()
    print("done")
