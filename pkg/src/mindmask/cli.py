"""Command-line surface: generate, extract, inject, mask, answer, eval, complexity."""

from __future__ import annotations

import argparse
import json
import sys

from .dataset import dump_dataset, load_dataset
from .inject import render_augmented
from .nkb import RuleBackend, extract_locations, generate_states, identify_key_entities
from .pipeline import (
    PipelineConfig,
    answer_question,
    complexity_csv,
    complexity_report,
    complexity_table,
    evaluate,
    prepare_story,
)
from .scene import mask_chain, retrieve_events
from .worldgen import GrammarConfig, generate_story


def _add_backend_flags(parser):
    parser.add_argument("--nkb", choices=("rule", "remote"), default="rule")
    parser.add_argument("--answerer", choices=("symbolic", "remote"), default="symbolic")
    parser.add_argument("--model", default=None, help="model name for remote backends")
    parser.add_argument("--base-url", default=None, help="chat endpoint base URL")
    parser.add_argument("--cache-dir", default=None, help="record cache directory")
    parser.add_argument("--no-ki", action="store_true", help="disable knowledge injection")
    parser.add_argument("--no-im", action="store_true", help="disable iterative masking")
    parser.add_argument("--no-reduce", action="store_true", help="disable question order reduction")


def _pipeline_config(args) -> PipelineConfig:
    nkb_backend = None
    answer_backend = None
    if args.nkb == "remote" or args.answerer == "remote":
        from .remote import ChatClient, RecordCache, RemoteAnswerer, RemoteBackend

        if not args.model or not args.base_url:
            sys.exit("remote backends need --model and --base-url")
        client = ChatClient(base_url=args.base_url, model=args.model)
        if args.nkb == "remote":
            cache = RecordCache(args.cache_dir) if args.cache_dir else None
            nkb_backend = RemoteBackend(client, cache=cache)
        if args.answerer == "remote":
            answer_backend = RemoteAnswerer(client)
    return PipelineConfig(
        nkb_backend=nkb_backend,
        answer_backend=answer_backend,
        inject_knowledge=not args.no_ki,
        apply_masking=not args.no_im,
        reduce_orders=not args.no_reduce,
    )


def _cmd_generate(args):
    items = []
    for offset in range(args.count):
        config = GrammarConfig(
            num_characters=args.characters,
            num_rooms=args.rooms,
            num_objects=args.objects,
            num_containers_per_room=args.containers,
            moves_per_room=args.moves,
            max_order=args.max_order,
            seed=args.seed + offset,
            allow_reentry=args.reentry,
            distractor_rate=args.distractor_rate,
        )
        items.append(generate_story(config))
    dump_dataset(items, args.output)
    print(f"wrote {len(items)} stories to {args.output}")


def _cmd_extract(args):
    items = load_dataset(args.dataset)
    cfg = _pipeline_config(args)
    backend = cfg.backend()
    rows = []
    for story_index, (story, questions) in enumerate(items):
        targets = identify_key_entities(story, questions, backend)
        records = generate_states(story, targets, backend)
        for r in records:
            rows.append(
                {
                    "story_index": story_index,
                    "event_index": r.event_index,
                    "entity": r.entity,
                    "attribute": r.attribute,
                    "state": r.state,
                }
            )
    with open(args.output, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row) + "\n")
    print(f"wrote {len(rows)} records to {args.output}")


def _story_artifacts(args):
    items = load_dataset(args.dataset)
    if not 0 <= args.story < len(items):
        sys.exit(f"story index {args.story} out of range 0..{len(items) - 1}")
    story, questions = items[args.story]
    cfg = _pipeline_config(args)
    return story, questions, cfg, prepare_story(story, questions, cfg)


def _cmd_inject(args):
    _, _, _, artifacts = _story_artifacts(args)
    print(render_augmented(artifacts.augmented))


def _cmd_mask(args):
    story, questions, cfg, artifacts = _story_artifacts(args)
    if not 0 <= args.question < len(questions):
        sys.exit(f"question index {args.question} out of range 0..{len(questions) - 1}")
    q = questions[args.question]
    masked = artifacts.omniscient
    if q.order >= 1:
        masked = mask_chain(
            artifacts.omniscient, [artifacts.character_graph(c) for c in q.chain_names]
        )
    view = retrieve_events(masked, artifacts.view_texts(cfg.inject_knowledge), chain=q.chain_names)
    if args.dump_graphs:
        graphs = {"omniscient": artifacts.omniscient.to_json(), "masked": masked.to_json()}
        for name in q.chain_names:
            graphs[name] = artifacts.character_graph(name).to_json()
        print(json.dumps(graphs, indent=2))
    print(f"question: {q.raw}")
    print(f"surviving events: {list(view.surviving)}")
    for text in view.texts:
        print(text)


def _cmd_answer(args):
    story, questions, cfg, artifacts = _story_artifacts(args)
    if not 0 <= args.question < len(questions):
        sys.exit(f"question index {args.question} out of range 0..{len(questions) - 1}")
    q = questions[args.question]
    outcome = answer_question(artifacts, q, cfg)
    print(f"question: {q.raw}")
    print(f"answer: {outcome.predicted}")
    if q.gold is not None:
        print(f"gold: {q.gold}")
    if outcome.empty_view:
        print("note: every event was masked; answered from initial declarations")


def _cmd_eval(args):
    items = load_dataset(args.dataset)
    cfg = _pipeline_config(args)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [args.seed]
    report = evaluate(
        items, cfg, seeds=seeds, subset_size=args.subset_size, workers=args.workers
    )
    print(report.table())
    if args.json:
        with open(args.json, "w", encoding="utf-8") as handle:
            handle.write(report.to_json())
        print(f"wrote JSON report to {args.json}")


def _cmd_complexity(args):
    rows = complexity_report(range(args.m_min, args.m_max + 1), range(args.k_min, args.k_max + 1))
    print(complexity_table(rows))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as handle:
            handle.write(complexity_csv(rows))
        print(f"wrote CSV to {args.csv}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mindmask", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic dataset with gold answers")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--characters", type=int, default=3)
    p.add_argument("--rooms", type=int, default=1)
    p.add_argument("--objects", type=int, default=1)
    p.add_argument("--containers", type=int, default=3)
    p.add_argument("--moves", type=int, default=2)
    p.add_argument("--max-order", type=int, default=2)
    p.add_argument("--reentry", action="store_true")
    p.add_argument("--distractor-rate", type=float, default=0.2)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("extract", help="run entity/state extraction, write records")
    p.add_argument("--dataset", required=True)
    p.add_argument("-o", "--output", required=True)
    _add_backend_flags(p)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("inject", help="print a story with injected knowledge")
    p.add_argument("--dataset", required=True)
    p.add_argument("--story", type=int, default=0)
    _add_backend_flags(p)
    p.set_defaults(func=_cmd_inject)

    p = sub.add_parser("mask", help="show the masked view for a question")
    p.add_argument("--dataset", required=True)
    p.add_argument("--story", type=int, default=0)
    p.add_argument("--question", type=int, default=0)
    p.add_argument("--dump-graphs", action="store_true")
    _add_backend_flags(p)
    p.set_defaults(func=_cmd_mask)

    p = sub.add_parser("answer", help="answer one question end to end")
    p.add_argument("--dataset", required=True)
    p.add_argument("--story", type=int, default=0)
    p.add_argument("--question", type=int, default=0)
    _add_backend_flags(p)
    p.set_defaults(func=_cmd_answer)

    p = sub.add_parser("eval", help="evaluate over seeded subsets")
    p.add_argument("--dataset", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", default=None, help="comma-separated seeds, e.g. 12,42,96")
    p.add_argument("--subset-size", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--json", default=None, help="write the full JSON report here")
    _add_backend_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("complexity", help="graph-count comparison table")
    p.add_argument("--m-min", type=int, default=5)
    p.add_argument("--m-max", type=int, default=5)
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=5)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=_cmd_complexity)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
