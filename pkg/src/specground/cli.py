"""Command-line pipeline: stage commands, end-to-end runs, eval harness.

Exit codes are a stable contract: 0 SAFE, 1 UNSAFE, 2 UNKNOWN, 3 pipeline
stage error (stage named on stderr), 4 unreadable/malformed input files,
64 usage errors.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

from . import report as report_mod
from .core import (
    Grounding,
    GroundedSpec,
    InputSample,
    KIND_BY_DOMAIN,
    Network,
    SemanticSpec,
    Verdict,
    load_network,
    predict,
)
from .detection import DetectorConfig, ground_image
from .errors import SpecGroundError
from .evalharness import (
    eval_detect,
    eval_parse,
    format_detect_report,
    format_parse_report,
)
from .parser import Parser, ParserConfig, extract_range_override, llm_fixture_load
from .review import ReviewServer, ReviewSession, approved_grounding, default_static_dir
from .specgen import OpParams, emit_vnnlib, generate
from .tabular import DEFAULT_DELTA, ground_tabular, load_schema
from .verifier import VerifierConfig, verify

EXIT_SAFE = 0
EXIT_UNSAFE = 1
EXIT_UNKNOWN = 2
EXIT_STAGE_ERROR = 3
EXIT_INPUT_ERROR = 4
EXIT_USAGE = 64

DOMAIN_BY_KIND = {v: k for k, v in KIND_BY_DOMAIN.items()}
_VERDICT_EXIT = {"SAFE": EXIT_SAFE, "UNSAFE": EXIT_UNSAFE, "UNKNOWN": EXIT_UNKNOWN}


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class InputFileError(Exception):
    pass


def _load_json_file(path: str, what: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputFileError(f"cannot read {what} {path}: {exc}") from exc


def _load_sample(path: str) -> InputSample:
    data = _load_json_file(path, "input sample")
    try:
        return InputSample.from_dict(data)
    except (KeyError, ValueError, TypeError) as exc:
        raise InputFileError(f"bad input sample {path}: {exc}") from exc


def _load_net(path: str) -> Network:
    try:
        return load_network(path)
    except (OSError, json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        raise InputFileError(f"bad network file {path}: {exc}") from exc


# ---- stage implementations (shared by stage commands and cmd_run) -------------

def _parser_config(args, domain: str) -> ParserConfig:
    template = "tabular" if domain == "tabular" else "visual"
    return ParserConfig(
        backend=args.parser,
        mode=args.mode,
        prompt_template_id=template,
        llm_endpoint=getattr(args, "llm_endpoint", "") or "",
        llm_model=getattr(args, "llm_model", "") or "",
        llm_api_key_env=getattr(args, "llm_api_key_env", "") or "",
        timeout=getattr(args, "llm_timeout", 30.0),
        lexicon_path=getattr(args, "lexicon", None),
        synonyms_path=getattr(args, "synonyms", None),
    )


def stage_parse(property_text: str, config: ParserConfig,
                llm_fixture_path: str | None) -> dict:
    fixture = llm_fixture_load(llm_fixture_path) if llm_fixture_path else None
    parser = Parser(config, fixture=fixture)
    result = parser.parse(property_text)
    return {
        "schema": 1,
        "kind": "parse_artifact",
        "property": property_text,
        "spec": result.spec.to_dict(),
        "raw_response": result.raw_response,
        "latency": result.latency,
    }


def stage_ground(parse_artifact: dict, sample: InputSample, args) -> dict:
    spec = SemanticSpec.from_dict(parse_artifact["spec"])
    property_text = parse_artifact.get("property", "")
    if getattr(args, "grounding_file", None):
        data = _load_json_file(args.grounding_file, "grounding file")
        grounding = Grounding.from_dict(data.get("grounding", data))
        grounding.validate_against(sample)
    elif spec.domain_hint == "tabular":
        schema = load_schema(getattr(args, "schema", None))
        override = extract_range_override(property_text) if property_text else None
        grounding = ground_tabular(spec, sample, schema,
                                   delta=getattr(args, "delta", DEFAULT_DELTA),
                                   range_override=override)
    elif spec.domain_hint == "image":
        config = DetectorConfig(
            mode=args.tightness,
            endpoint=getattr(args, "detector_endpoint", "") or "",
            fixture_path=getattr(args, "fixtures", "") or "",
        )
        grounding = ground_image(spec, sample, config)
    else:
        raise SpecGroundError(
            "audio groundings are fixture-only: pass --grounding-file with "
            "time_interval regions"
        )
    return {
        "schema": 1,
        "kind": "grounding_artifact",
        "property": property_text,
        "spec": spec.to_dict(),
        "grounding": grounding.to_dict(),
    }


def _op_params(args) -> OpParams:
    return OpParams(
        epsilon=args.epsilon,
        beta=args.beta,
        contrast_up=args.contrast_up,
        contrast_down=args.contrast_down,
        gain=args.gain,
        mask_value=args.mask,
        remove_free=args.remove_free,
    )


def stage_genspec(ground_artifact: dict, sample: InputSample, net: Network,
                  params: OpParams) -> dict:
    spec = SemanticSpec.from_dict(ground_artifact["spec"])
    grounding = Grounding.from_dict(ground_artifact["grounding"])
    target = predict(net, sample.values)
    grounded = generate(sample, grounding, spec.operation, params, target,
                        provenance_spec=spec)
    return {
        "schema": 1,
        "kind": "grounded_spec_artifact",
        "grounded_spec": grounded.to_dict(),
    }


def _verifier_config(args) -> VerifierConfig:
    return VerifierConfig(
        max_nodes=args.max_nodes,
        split_tolerance=args.split_tolerance,
        margin_tolerance=args.margin_tolerance,
        pgd_steps=args.pgd_steps,
        pgd_restarts=args.pgd_restarts,
        parallel_workers=args.workers,
    )


def stage_verify(gs_artifact: dict, net: Network, config: VerifierConfig) -> dict:
    grounded = GroundedSpec.from_dict(gs_artifact["grounded_spec"])
    verdict = verify(net, grounded, config)
    return {"schema": 1, "kind": "verdict_artifact", "verdict": verdict.to_dict()}


# ---- approval gate ---------------------------------------------------------------

def _terminal_approval(grounding: Grounding) -> bool:
    print("Proposed regions:")
    for i, r in enumerate(grounding.regions):
        print(f"  [{i}] {r}")
    try:
        answer = input("Approve these regions? [y/N] ")
    except EOFError:
        answer = ""
    return answer.strip().lower() in ("y", "yes")


def _review_approval(args, run_id: str, property_text: str, sample: InputSample,
                     grounding: Grounding):
    session = ReviewSession(
        run_id=run_id,
        property_text=property_text,
        sample=sample,
        regions=list(grounding.regions),
    )
    server = ReviewServer(session=session, static_dir=default_static_dir(),
                          port=args.review_port)
    server.start()
    print(f"Review UI listening on http://127.0.0.1:{server.port}/ (run {run_id})")
    status = server.wait_decision(timeout=args.review_timeout)
    if status != "approved":
        server.shutdown()
        return None, {"mode": "review", "status": status, "edited": False}, None
    approved = approved_grounding(session, grounding)
    section = {"mode": "review", "status": "approved", "edited": session.edited}
    return approved, section, server


def cmd_run(args) -> int:
    sample = _load_sample(args.input)
    net = _load_net(args.net)
    domain = args.domain or DOMAIN_BY_KIND[sample.kind]
    if KIND_BY_DOMAIN[domain] != sample.kind:
        raise InputFileError(
            f"--domain {domain} does not match input kind {sample.kind}"
        )
    run_id = report_mod.new_run_id()
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    parse_art = stage_parse(args.property, _parser_config(args, domain),
                            getattr(args, "llm_fixture", None))
    timings["parse"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    ground_art = stage_ground(parse_art, sample, args)
    timings["ground"] = time.perf_counter() - t0
    grounding = Grounding.from_dict(ground_art["grounding"])

    review_server = None
    if args.yes:
        approval = {"mode": "auto", "status": "approved", "edited": False}
    elif args.review:
        approved, approval, review_server = _review_approval(
            args, run_id, args.property, sample, grounding)
        if approved is None:
            grounding = None
        else:
            grounding = approved
            ground_art["grounding"] = grounding.to_dict()
    else:
        ok = _terminal_approval(grounding)
        approval = {"mode": "terminal",
                    "status": "approved" if ok else "rejected",
                    "edited": False}
        if not ok:
            grounding = None

    if grounding is None:
        # rejected approval ends the run without a verification attempt
        verdict = Verdict("UNKNOWN")
        rep = report_mod.build_report(
            run_id=run_id, property_text=args.property, domain=domain,
            parse_section=_strip(parse_art), grounding_section=_strip(ground_art),
            approval_section=approval, grounded_spec_section=None,
            verdict_section=verdict.to_dict(), timings=timings,
            network_path=args.net, input_path=args.input)
        _finish_report(rep, args)
        print("verdict: UNKNOWN (regions not approved)")
        return EXIT_UNKNOWN

    t0 = time.perf_counter()
    gs_art = stage_genspec(ground_art, sample, net, _op_params(args))
    timings["genspec"] = time.perf_counter() - t0

    if args.export_vnnlib:
        grounded = GroundedSpec.from_dict(gs_art["grounded_spec"])
        with open(args.export_vnnlib, "w", encoding="utf-8") as fh:
            fh.write(emit_vnnlib(grounded, net))
        print(f"wrote query to {args.export_vnnlib}")
        if review_server is not None:
            review_server.shutdown()
        return EXIT_SAFE

    t0 = time.perf_counter()
    verdict_art = stage_verify(gs_art, net, _verifier_config(args))
    timings["verify"] = time.perf_counter() - t0

    rep = report_mod.build_report(
        run_id=run_id, property_text=args.property, domain=domain,
        parse_section=_strip(parse_art), grounding_section=_strip(ground_art),
        approval_section=approval,
        grounded_spec_section=gs_art["grounded_spec"],
        verdict_section=verdict_art["verdict"], timings=timings,
        network_path=args.net, input_path=args.input)
    _finish_report(rep, args)

    status = verdict_art["verdict"]["status"]
    nodes = verdict_art["verdict"]["stats"]["nodes_explored"]
    print(f"verdict: {status} ({nodes} nodes)")
    if review_server is not None:
        review_server.attach_report(rep)
        if args.review_hold > 0:
            print(f"holding review UI for {args.review_hold:.0f}s to show the result")
            time.sleep(args.review_hold)
        review_server.shutdown()
    return _VERDICT_EXIT[status]


def _strip(artifact: dict) -> dict:
    return {k: v for k, v in artifact.items() if k not in ("schema", "kind")}


def _finish_report(rep: dict, args) -> None:
    if getattr(args, "report_out", None):
        report_mod.save_json_atomic(rep, args.report_out)
        print(f"report written to {args.report_out}")


# ---- stage commands -----------------------------------------------------------

def _write_artifact(artifact: dict, out_path: str | None) -> None:
    if out_path:
        report_mod.save_json_atomic(artifact, out_path)
    else:
        json.dump(artifact, sys.stdout, indent=1)
        sys.stdout.write("\n")


def cmd_parse(args) -> int:
    domain = args.domain or ("tabular" if args.template == "tabular" else "image")
    artifact = stage_parse(args.property, _parser_config(args, domain),
                           getattr(args, "llm_fixture", None))
    _write_artifact(artifact, args.out)
    spec = artifact["spec"]
    print(f"objects={spec['objects']} action={spec['operation']}", file=sys.stderr)
    return 0


def cmd_ground(args) -> int:
    parse_art = _load_json_file(args.spec, "parse artifact")
    sample = _load_sample(args.input)
    artifact = stage_ground(parse_art, sample, args)
    _write_artifact(artifact, args.out)
    print(f"{len(artifact['grounding']['regions'])} region(s)", file=sys.stderr)
    return 0


def cmd_genspec(args) -> int:
    ground_art = _load_json_file(args.grounding, "grounding artifact")
    sample = _load_sample(args.input)
    net = _load_net(args.net)
    artifact = stage_genspec(ground_art, sample, net, _op_params(args))
    _write_artifact(artifact, args.out)
    gs = artifact["grounded_spec"]
    free = sum(1 for lo, up in zip(gs["lower"], gs["upper"]) if up > lo)
    print(f"grounded spec: {free} free coordinate(s), target class {gs['target_class']}",
          file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    data = _load_json_file(args.spec, "grounded spec")
    if "grounded_spec" not in data or data["grounded_spec"] is None:
        raise InputFileError(f"{args.spec} holds no grounded spec")
    net = _load_net(args.net)
    gs_art = {"grounded_spec": data["grounded_spec"]}
    if args.export_vnnlib:
        grounded = GroundedSpec.from_dict(gs_art["grounded_spec"])
        with open(args.export_vnnlib, "w", encoding="utf-8") as fh:
            fh.write(emit_vnnlib(grounded, net))
        print(f"wrote query to {args.export_vnnlib}")
        return EXIT_SAFE
    artifact = stage_verify(gs_art, net, _verifier_config(args))
    _write_artifact(artifact, args.out)
    status = artifact["verdict"]["status"]
    print(f"verdict: {status}", file=sys.stderr)
    return _VERDICT_EXIT[status]


# ---- eval commands ---------------------------------------------------------------

def cmd_eval_parse(args) -> int:
    domain = "tabular" if args.template == "tabular" else "image"
    config = _parser_config(args, domain)
    fixture = llm_fixture_load(args.llm_fixture) if args.llm_fixture else None
    try:
        rep = eval_parse(args.fixtures, config, fixture_table=fixture)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise InputFileError(f"bad fixtures file {args.fixtures}: {exc}") from exc
    print(format_parse_report(rep))
    if args.report_out:
        report_mod.save_json_atomic(rep, args.report_out)
    return 0


def cmd_eval_detect(args) -> int:
    try:
        rep = eval_detect(args.fixtures, args.detector_fixture, iou_threshold=args.iou)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise InputFileError(f"bad fixtures file: {exc}") from exc
    print(format_detect_report(rep))
    if args.report_out:
        report_mod.save_json_atomic(rep, args.report_out)
    return 0


def cmd_report(args) -> int:
    rep = _load_json_file(args.report, "run report")
    server = ReviewServer(report=rep, static_dir=default_static_dir(), port=args.port)
    server.start()
    print(f"Serving report on http://127.0.0.1:{server.port}/ — Ctrl+C to stop")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.shutdown()
    return 0


# ---- argument wiring ---------------------------------------------------------------

def _add_parser_flags(p):
    p.add_argument("--parser", choices=["rules", "llm"], default="rules")
    p.add_argument("--mode", choices=["detailed", "minimal"], default="detailed")
    p.add_argument("--llm-endpoint", default="")
    p.add_argument("--llm-model", default="")
    p.add_argument("--llm-api-key-env", default="",
                   help="name of the environment variable holding the API key")
    p.add_argument("--llm-timeout", type=float, default=30.0)
    p.add_argument("--llm-fixture", default=None,
                   help="recorded response table for offline llm replay")
    p.add_argument("--lexicon", default=None, help="trigger lexicon override")
    p.add_argument("--synonyms", default=None, help="attribute synonym override")


def _add_ground_flags(p):
    p.add_argument("--tightness", choices=["tight", "loose"], default="tight")
    p.add_argument("--schema", default=None, help="dataset schema JSON (tabular)")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.add_argument("--fixtures", default="",
                   help="detector fixture table (image domain)")
    p.add_argument("--detector-endpoint", default="")
    p.add_argument("--grounding-file", default=None,
                   help="use a pre-computed grounding artifact (required for audio)")


def _add_op_flags(p):
    p.add_argument("--epsilon", type=float, default=OpParams.epsilon)
    p.add_argument("--beta", type=float, default=OpParams.beta)
    p.add_argument("--gain", type=float, default=OpParams.gain)
    p.add_argument("--mask", type=float, default=OpParams.mask_value)
    p.add_argument("--contrast-up", type=float, default=OpParams.contrast_up)
    p.add_argument("--contrast-down", type=float, default=OpParams.contrast_down)
    p.add_argument("--remove-free", action="store_true",
                   help="treat removal as free pixels instead of constant masking")


def _add_verifier_flags(p):
    p.add_argument("--max-nodes", type=int, default=VerifierConfig.max_nodes)
    p.add_argument("--split-tolerance", type=float, default=VerifierConfig.split_tolerance)
    p.add_argument("--margin-tolerance", type=float, default=VerifierConfig.margin_tolerance)
    p.add_argument("--pgd-steps", type=int, default=VerifierConfig.pgd_steps)
    p.add_argument("--pgd-restarts", type=int, default=VerifierConfig.pgd_restarts)
    p.add_argument("--workers", type=int, default=VerifierConfig.parallel_workers)


def build_arg_parser() -> _ArgumentParser:
    top = _ArgumentParser(prog="specground",
                          description="Ground natural-language robustness properties "
                                      "and verify them on dense ReLU networks.")
    sub = top.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="full pipeline: parse, ground, approve, verify")
    run.add_argument("property", help="natural-language property text")
    run.add_argument("--input", required=True, help="input sample JSON")
    run.add_argument("--net", required=True, help="network JSON")
    run.add_argument("--domain", choices=["tabular", "image", "audio"], default=None)
    _add_parser_flags(run)
    _add_ground_flags(run)
    _add_op_flags(run)
    _add_verifier_flags(run)
    run.add_argument("--yes", action="store_true", help="auto-approve detected regions")
    run.add_argument("--review", action="store_true", help="approve via the web panel")
    run.add_argument("--review-port", type=int, default=0)
    run.add_argument("--review-timeout", type=float, default=600.0)
    run.add_argument("--review-hold", type=float, default=0.0,
                     help="keep the panel up this many seconds after the verdict")
    run.add_argument("--export-vnnlib", default=None,
                     help="write the query for an external verifier instead of deciding")
    run.add_argument("--report-out", default="specground_report.json",
                     help="run report destination (default: ./specground_report.json)")
    run.set_defaults(func=cmd_run)

    parse = sub.add_parser("parse", help="stage: property text -> semantic spec")
    parse.add_argument("property")
    parse.add_argument("--template", choices=["visual", "tabular"], default="visual")
    parse.add_argument("--domain", choices=["tabular", "image", "audio"], default=None)
    _add_parser_flags(parse)
    parse.add_argument("--out", default=None)
    parse.set_defaults(func=cmd_parse)

    ground = sub.add_parser("ground", help="stage: semantic spec -> grounded regions")
    ground.add_argument("--spec", required=True, help="parse artifact JSON")
    ground.add_argument("--input", required=True)
    _add_ground_flags(ground)
    ground.add_argument("--out", default=None)
    ground.set_defaults(func=cmd_ground)

    genspec = sub.add_parser("genspec", help="stage: grounding -> box constraints")
    genspec.add_argument("--grounding", required=True, help="grounding artifact JSON")
    genspec.add_argument("--input", required=True)
    genspec.add_argument("--net", required=True)
    _add_op_flags(genspec)
    genspec.add_argument("--out", default=None)
    genspec.set_defaults(func=cmd_genspec)

    verify_p = sub.add_parser("verify", help="stage: decide a grounded spec")
    verify_p.add_argument("--spec", required=True,
                          help="grounded spec artifact or run report JSON")
    verify_p.add_argument("--net", required=True)
    _add_verifier_flags(verify_p)
    verify_p.add_argument("--export-vnnlib", default=None)
    verify_p.add_argument("--out", default=None)
    verify_p.set_defaults(func=cmd_verify)

    ep = sub.add_parser("eval-parse", help="score the parser on labeled prompts")
    ep.add_argument("--fixtures", required=True)
    ep.add_argument("--template", choices=["visual", "tabular"], default="visual")
    _add_parser_flags(ep)
    ep.add_argument("--report-out", default=None)
    ep.set_defaults(func=cmd_eval_parse)

    ed = sub.add_parser("eval-detect", help="score detection configs on labeled boxes")
    ed.add_argument("--fixtures", required=True, help="labeled detection items")
    ed.add_argument("--detector-fixture", required=True, help="recorded service responses")
    ed.add_argument("--iou", type=float, default=0.5)
    ed.add_argument("--report-out", default=None)
    ed.set_defaults(func=cmd_eval_detect)

    rep = sub.add_parser("report", help="serve a finished run report to the panel")
    rep.add_argument("report")
    rep.add_argument("--port", type=int, default=0)
    rep.set_defaults(func=cmd_report)

    return top


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputFileError as exc:
        print(f"specground: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except SpecGroundError as exc:
        print(f"specground: error at stage '{exc.stage}': {exc}", file=sys.stderr)
        return EXIT_STAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
