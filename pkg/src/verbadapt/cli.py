"""Command-line front end for the constraint/adapter/event pipeline.

Exit codes: 0 success, 2 validation error (bad inputs, malformed files,
config mismatches). Relative output paths are resolved under
$VERBADAPT_OUTPUT_ROOT when set; $VERBADAPT_THREADS caps torch threads.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

logger = logging.getLogger(__name__)


class CliError(Exception):
    pass


def _out_path(p: str) -> Path:
    root = os.environ.get("VERBADAPT_OUTPUT_ROOT")
    path = Path(p)
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def _load_constraints(path):
    from .lexicon import ConstraintSet

    return ConstraintSet.load_tsv(path, source=str(path))


def _load_space(path, language="en", tag=None):
    from .embeddings import load_embeddings_text

    return load_embeddings_text(path, language=language, alignment_tag=tag)


def cmd_extract_constraints(args) -> int:
    from .lexicon import generate_positive_pairs, lexicon_stats, load_lexicon

    lex = load_lexicon(args.infile, format=args.format, language=args.language)
    constraints = generate_positive_pairs(lex)
    if args.stats:
        print(lexicon_stats(lex).format())
    if args.out:
        out = _out_path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        constraints.save_tsv(out)
        print(f"wrote {len(constraints)} pairs to {out}")
    return 0


def cmd_sample_debug(args) -> int:
    from .sampling import SamplingConfig, epoch_batches

    constraints = _load_constraints(args.constraints)
    space = _load_space(args.embeddings)
    cfg = SamplingConfig(k=args.k, scheme=args.scheme, batch_positives=args.batch_positives,
                         seed=args.seed)
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        emitted = 0
        for batch in epoch_batches(constraints, space, cfg, epoch=0):
            for (pair, label), prov in zip(batch.instances, batch.provenance):
                fh.write(f"{pair.first}\t{pair.second}\t{label}\t{prov}\n")
            emitted += 1
            if emitted >= args.batches:
                break
    print(f"wrote {emitted} batches to {out}")
    return 0


def _build_or_load_encoder(args, extra_words=(), embedding_space=None):
    from .encoder import WordPieceTokenizer, build_tiny_desk_encoder, load_encoder

    if args.encoder:
        return load_encoder(args.encoder)
    words = sorted(set(extra_words))
    tokenizer = WordPieceTokenizer.build(words)
    return build_tiny_desk_encoder(
        tokenizer, num_layers=args.layers, hidden=args.hidden, seed=args.seed,
        embedding_space=embedding_space,
    )


def cmd_train_adapter(args) -> int:
    import torch

    from .encoder import insert_adapters, save_adapter_checkpoint, save_encoder
    from .manifest import file_sha256, start_run
    from .pair_task import VerbTrainConfig, train_verb_adapter, write_training_log
    from .sampling import SamplingConfig

    constraints = _load_constraints(args.constraints)
    space = _load_space(args.embeddings)
    run_dir = start_run(_out_path(args.out), {
        "command": "train-adapter",
        "constraints": file_sha256(args.constraints),
        "embeddings": file_sha256(args.embeddings),
        "epochs": args.epochs, "learning_rate": args.lr, "reduction": args.reduction,
        "k": args.k, "scheme": args.scheme, "batch_positives": args.batch_positives,
        "seed": args.seed, "patience": args.patience,
        "resource": args.resource, "language": args.language,
    })
    encoder = _build_or_load_encoder(args, extra_words=constraints.lemmas(), embedding_space=space)
    stack = insert_adapters(encoder, reduction=args.reduction, seed=args.seed)
    cfg = VerbTrainConfig(
        epochs=args.epochs, learning_rate=args.lr, seed=args.seed, patience=args.patience,
        sampling=SamplingConfig(k=args.k, scheme=args.scheme,
                                batch_positives=args.batch_positives, seed=args.seed),
    )
    head, log = train_verb_adapter(stack, constraints, space, cfg)
    save_encoder(run_dir / "encoder.pt", encoder)
    save_adapter_checkpoint(run_dir / "verb_adapter.pt", stack.verb_adapters,
                            resource=args.resource, language=args.language,
                            reduction=args.reduction, hidden=encoder.cfg.hidden)
    torch.save(head.state_dict(), run_dir / "pair_classifier.pt")
    write_training_log(run_dir / "training_log.csv", log)
    if log:
        print(f"trained verb adapter for {len(log)} epochs; final loss {log[-1]['loss']:.4f}")
    else:
        print("trained verb adapter for 0 epochs")
    print(f"artifacts in {run_dir}")
    return 0


def _make_stack_factory(args, encoder_path):
    """Factory building a fresh stack per run, per the adapter source and regime."""
    import torch

    from .encoder import (AdapterStack, insert_adapters, load_adapter_checkpoint,
                          load_encoder, stack_task_adapter)

    def factory(seed: int = 0):
        encoder = load_encoder(encoder_path)
        source = args.adapter
        if source == "none":
            stack = AdapterStack(encoder)
        elif source == "random":
            stack = insert_adapters(encoder, reduction=args.reduction, init="random", seed=seed)
        else:  # a trained adapter checkpoint path
            stack = insert_adapters(encoder, reduction=args.reduction, seed=seed)
            adapters, meta = load_adapter_checkpoint(source, encoder)
            stack.verb_adapters = adapters
            stack.verb_reduction = meta["reduction"]
        regime = args.regime.lower()
        if regime in ("ta", "2ta"):
            if stack.verb_adapters is None:
                raise CliError("TA/2TA regimes require a verb adapter (use --adapter random or a checkpoint)")
            task_red = args.reduction // 2 if regime == "2ta" else args.reduction
            stack_task_adapter(stack, reduction=max(task_red, 1), seed=seed + 1)
        return stack

    return factory


def cmd_finetune(args) -> int:
    from .events import EventTrainConfig, finetune_event_model, load_conll
    from .manifest import derive_seeds, file_sha256, start_run
    from .metrics import ScoreReport

    train = load_conll(args.train, task=args.task, split="train")
    test = load_conll(args.test, task=args.task, split="test")
    dev = load_conll(args.dev, task=args.task, split="dev") if args.dev else None
    run_dir = start_run(_out_path(args.out), {
        "command": "finetune", "task": args.task,
        "train": file_sha256(args.train), "test": file_sha256(args.test),
        "encoder": file_sha256(args.encoder),
        "adapter": args.adapter if args.adapter in ("random", "none") else file_sha256(args.adapter),
        "regime": args.regime, "epochs": args.epochs, "learning_rate": args.lr,
        "batch_size": args.batch_size, "runs": args.runs, "seed": args.seed,
    })
    seeds = derive_seeds(args.seed, args.runs) if args.seeds == "auto" else [
        int(s) for s in args.seeds.split(",")
    ]
    if len(seeds) != args.runs:
        raise CliError(f"{len(seeds)} seeds given for {args.runs} runs")
    (run_dir / "seeds.txt").write_text("\n".join(map(str, seeds)) + "\n")

    factory_base = _make_stack_factory(args, args.encoder)
    adapter_source = {"random": "Random", "none": "None"}.get(args.adapter, "VN")
    per_subtask: dict[str, list[float]] = {}
    for seed in seeds:
        cfg = EventTrainConfig(epochs=args.epochs, learning_rate=args.lr,
                               batch_size=args.batch_size, seed=seed)
        result = finetune_event_model(lambda: factory_base(seed), train, test,
                                      args.regime, adapter_source, cfg, dev=dev)
        for sub, (p, r, f1) in result.items():
            per_subtask.setdefault(sub, []).append(f1)
        print(f"seed {seed}: " + "  ".join(f"{sub} F1={prf[2]:.2f}" for sub, prf in result.items()))
    for sub, scores in per_subtask.items():
        report = ScoreReport(subtask=sub)
        report.add(f"{args.adapter}:{args.regime}", scores)
        report.save(run_dir / f"report_{sub.replace('&', '_')}.kv")
        print(f"{sub}: mean F1 {sum(scores) / len(scores):.2f} over {len(scores)} runs")
    return 0


def cmd_translate_constraints(args) -> int:
    from .transfer import AlignedSpacePair, translate_pairs

    constraints = _load_constraints(args.constraints)
    spaces = AlignedSpacePair(
        source=_load_space(args.source_embeddings, language=args.source_language, tag=args.alignment),
        target=_load_space(args.target_embeddings, language=args.target_language, tag=args.alignment),
    )
    translated, report = translate_pairs(constraints, spaces, retrieval=args.retrieval)
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    translated.save_tsv(out)
    print(f"kept {report.kept} pairs ({report.dropped_oov} OOV, "
          f"{report.dropped_identical} identical, {report.duplicates_merged} duplicates)")
    return 0


def cmd_filter_constraints(args) -> int:
    from .transfer import AlignedSpacePair, StmTrainConfig, load_stm, save_stm, stm_filter, train_stm

    noisy = _load_constraints(args.constraints)
    spaces = AlignedSpacePair(
        source=_load_space(args.source_embeddings, language=args.source_language, tag=args.alignment),
        target=_load_space(args.target_embeddings, language=args.target_language, tag=args.alignment),
    )
    if args.stm:
        model = load_stm(args.stm)
    elif args.stm_train_constraints:
        clean = _load_constraints(args.stm_train_constraints)
        model, stats = train_stm(clean, spaces.source,
                                 StmTrainConfig(iterations=args.stm_iterations,
                                                learning_rate=args.stm_lr, seed=args.seed))
        print(f"trained filtering model: accuracy {stats['train_accuracy']:.3f}")
        if args.save_stm:
            save_stm(_out_path(args.save_stm), model)
    else:
        raise CliError("provide --stm (checkpoint) or --stm-train-constraints (clean source pairs)")
    purified, report = stm_filter(noisy, model, spaces)
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    purified.save_tsv(out)
    print(f"retained {report.kept}/{report.kept + report.rejected} pairs "
          f"(retention {report.retention_rate:.3f}, {report.dropped_oov} OOV dropped)")
    return 0


def cmd_vtrans(args) -> int:
    import torch

    from .encoder import insert_adapters, save_adapter_checkpoint, save_encoder
    from .manifest import file_sha256, start_run
    from .pair_task import VerbTrainConfig, write_training_log
    from .sampling import SamplingConfig
    from .transfer import AlignedSpacePair, StmTrainConfig, run_vtrans

    constraints = _load_constraints(args.constraints)
    spaces = AlignedSpacePair(
        source=_load_space(args.source_embeddings, language=args.source_language, tag=args.alignment),
        target=_load_space(args.target_embeddings, language=args.target_language, tag=args.alignment),
    )
    run_dir = start_run(_out_path(args.out), {
        "command": "vtrans",
        "constraints": file_sha256(args.constraints),
        "source_embeddings": file_sha256(args.source_embeddings),
        "target_embeddings": file_sha256(args.target_embeddings),
        "source_language": args.source_language, "target_language": args.target_language,
        "retrieval": args.retrieval, "stm_iterations": args.stm_iterations,
        "stm_lr": args.stm_lr, "epochs": args.epochs, "learning_rate": args.lr,
        "reduction": args.reduction, "seed": args.seed,
    })
    encoder = _build_or_load_encoder(args, extra_words=spaces.target.vocabulary,
                                     embedding_space=spaces.target)
    stack = insert_adapters(encoder, reduction=args.reduction, seed=args.seed)
    stm_cfg = StmTrainConfig(iterations=args.stm_iterations, learning_rate=args.stm_lr,
                             seed=args.seed)
    adapter_cfg = VerbTrainConfig(
        epochs=args.epochs, learning_rate=args.lr, seed=args.seed,
        sampling=SamplingConfig(k=args.k, scheme=args.scheme,
                                batch_positives=args.batch_positives, seed=args.seed),
    )
    result = run_vtrans(constraints, spaces, stack, stm_cfg, adapter_cfg,
                        retrieval=args.retrieval)
    result.purified.save_tsv(run_dir / "purified_constraints.tsv")
    save_encoder(run_dir / "encoder.pt", encoder)
    save_adapter_checkpoint(run_dir / "verb_adapter.pt", stack.verb_adapters,
                            resource=args.constraints, language=args.target_language,
                            reduction=args.reduction, hidden=encoder.cfg.hidden)
    write_training_log(run_dir / "training_log.csv", result.training_log)
    print(f"vtrans: {result.stats['source_pairs']} source pairs -> "
          f"{result.stats['purified_pairs']} purified target pairs")
    print(f"artifacts in {run_dir}")
    return 0


def cmd_evaluate(args) -> int:
    from .events import load_conll
    from .metrics import ace_span_f1, token_f1

    gold = load_conll(args.gold, task=args.task)
    pred = load_conll(args.pred, task=args.task)
    if args.task == "tempeval-trigger":
        gold_labels = [l for s in gold.sentences() for l in s.labels]
        pred_labels = [l for s in pred.sentences() for l in s.labels]
        p, r, f1 = token_f1(pred_labels, gold_labels)
        print(f"T-ident&class  P={p:.2f} R={r:.2f} F1={f1:.2f}")
    else:
        gold_docs = [list(s.events) for doc in gold.documents for s in doc]
        pred_docs = [list(s.events) for doc in pred.documents for s in doc]
        for sub in ("T-ident", "T-class", "ARG-ident", "ARG-class"):
            p, r, f1 = ace_span_f1(pred_docs, gold_docs, sub)
            print(f"{sub:<10}  P={p:.2f} R={r:.2f} F1={f1:.2f}")
    return 0


def cmd_report(args) -> int:
    from .metrics import ScoreReport

    for path in args.scores:
        report = ScoreReport.load(path)
        print(report.format_table())
    return 0


def _add_encoder_args(p):
    p.add_argument("--encoder", help="encoder checkpoint; omitted = fresh tiny-desk encoder")
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--layers", type=int, default=2)


def _add_sampling_args(p):
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--scheme", default="ccr")
    p.add_argument("--batch-positives", type=int, default=16)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="verbadapt",
                                     description="verb-knowledge adapters for event extraction")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-constraints", help="lexicon -> positive pair TSV")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", required=True,
                   choices=["verbnet-xml", "framenet-lu", "generic-class-map"])
    p.add_argument("--out")
    p.add_argument("--stats", action="store_true")
    p.add_argument("--language", default="en")
    p.set_defaults(func=cmd_extract_constraints)

    p = sub.add_parser("sample-debug", help="dump sampled training batches as TSV")
    p.add_argument("--constraints", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--batches", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    _add_sampling_args(p)
    p.set_defaults(func=cmd_sample_debug)

    p = sub.add_parser("train-adapter", help="train a verb adapter on positive constraints")
    p.add_argument("--constraints", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--reduction", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--resource", default="unknown")
    p.add_argument("--language", default="en")
    _add_sampling_args(p)
    _add_encoder_args(p)
    p.set_defaults(func=cmd_train_adapter)

    p = sub.add_parser("finetune", help="fine-tune on an event extraction task")
    p.add_argument("--task", required=True, choices=["tempeval-trigger", "ace-sequence"])
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--dev")
    p.add_argument("--encoder", required=True)
    p.add_argument("--adapter", required=True,
                   help="verb adapter checkpoint path, or 'random', or 'none'")
    p.add_argument("--regime", default="ta", choices=["fft", "ta", "2ta"])
    p.add_argument("--reduction", type=int, default=16)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seeds", default="auto", help="'auto' or comma-separated list")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("translate-constraints", help="nearest-neighbour translation of pairs")
    p.add_argument("--constraints", required=True)
    p.add_argument("--source-embeddings", required=True)
    p.add_argument("--target-embeddings", required=True)
    p.add_argument("--source-language", default="en")
    p.add_argument("--target-language", default="xx")
    p.add_argument("--alignment", default=None)
    p.add_argument("--retrieval", default="cosine", choices=["cosine", "csls"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_translate_constraints)

    p = sub.add_parser("filter-constraints", help="filter noisy translated pairs with a pair-scoring model")
    p.add_argument("--constraints", required=True)
    p.add_argument("--stm", help="trained filtering-model checkpoint")
    p.add_argument("--stm-train-constraints", help="clean source-language pairs to train the model on")
    p.add_argument("--stm-iterations", type=int, default=10)
    p.add_argument("--stm-lr", type=float, default=1e-4)
    p.add_argument("--save-stm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--source-embeddings", required=True)
    p.add_argument("--target-embeddings", required=True)
    p.add_argument("--source-language", default="en")
    p.add_argument("--target-language", default="xx")
    p.add_argument("--alignment", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter_constraints)

    p = sub.add_parser("vtrans", help="translate -> STM filter -> retrain adapter")
    p.add_argument("--constraints", required=True)
    p.add_argument("--source-embeddings", required=True)
    p.add_argument("--target-embeddings", required=True)
    p.add_argument("--source-language", default="en")
    p.add_argument("--target-language", default="xx")
    p.add_argument("--alignment", default=None)
    p.add_argument("--retrieval", default="cosine", choices=["cosine", "csls"])
    p.add_argument("--stm-iterations", type=int, default=10)
    p.add_argument("--stm-lr", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--reduction", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_sampling_args(p)
    _add_encoder_args(p)
    p.set_defaults(func=cmd_vtrans)

    p = sub.add_parser("evaluate", help="score prediction files against gold")
    p.add_argument("--task", required=True, choices=["tempeval-trigger", "ace-sequence"])
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="print score report tables")
    p.add_argument("scores", nargs="+")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = os.environ.get("VERBADAPT_THREADS")
    if threads:
        import torch

        torch.set_num_threads(int(threads))
    try:
        return args.func(args)
    except (CliError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # domain validation errors from the library
        from .embeddings import EmbeddingError
        from .encoder import EncoderError
        from .events import EventDataError
        from .lexicon import LexiconError
        from .manifest import ManifestError
        from .metrics import MetricsError
        from .pair_task import TrainingError
        from .sampling import SamplingError
        from .transfer import TransferError

        if isinstance(exc, (LexiconError, SamplingError, EmbeddingError, EncoderError,
                            TrainingError, EventDataError, MetricsError, TransferError,
                            ManifestError)):
            print(f"error: {exc}", file=sys.stderr)
            return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
