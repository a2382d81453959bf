"""``discaug`` command line.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 one or more
experiment cells failed (partial results are still written).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import corpus, models, pipeline, synthetic
from .errors import ConfigError, DataError, DivergenceError
from .segmenter import MarkerSet

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CELLS = 0, 1, 2, 3

log = logging.getLogger("discaug")


def _csv_list(value):
    return [v.strip() for v in value.split(",") if v.strip()]


def _int_list(value):
    try:
        return [int(v) for v in _csv_list(value)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from None


def _markers(value):
    try:
        return MarkerSet.parse(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_neural_flags(p, hidden_default):
    p.add_argument("--dim", type=int, default=64, help="embedding size")
    p.add_argument("--hidden", type=int, default=hidden_default, help="LSTM hidden units per direction")
    p.add_argument("--attn", type=int, default=16, help="attention size")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate")
    p.add_argument("--embeddings", help="word vectors in '<count> <dim>' text format")
    p.add_argument("--seed", type=int, default=0)


def cmd_train_validator(args):
    data = corpus.load_tsv(args.input)
    dev = corpus.load_tsv(args.dev) if args.dev else None
    cfg = models.TrainConfig.validator(
        seed=args.seed, dim=args.dim, hidden=args.hidden, attn_dim=args.attn, epochs=args.epochs,
        batch_size=args.batch_size, lr=args.lr, embeddings=args.embeddings,
    )
    model = models.train(data, cfg, dev=dev)
    models.save_model(model, args.out)
    print(f"validator trained on {len(data)} samples -> {args.out}")
    return EXIT_OK


def cmd_train(args):
    data = corpus.load_tsv(args.input)
    overrides = dict(seed=args.seed, dim=args.dim, hidden=args.hidden, attn_dim=args.attn,
                     epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
                     embeddings=args.embeddings)
    if args.oversample:
        data = corpus.oversample(data, args.seed)
    model = models.train(data, models.TrainConfig.for_kind(args.kind, **overrides))
    models.save_model(model, args.out)
    print(f"{args.kind.value} trained on {len(data)} samples -> {args.out}")
    return EXIT_OK


def cmd_augment(args):
    data = corpus.load_tsv(args.input)
    validator = None
    if not args.no_validate:
        if not args.validator:
            raise ConfigError("--validator is required unless --no-validate is given")
        validator = models.load_model(args.validator)
    out = pipeline.augment(data, args.markers, validator, validate=not args.no_validate,
                           min_confidence=args.min_confidence)
    corpus.write_tsv(out, args.output)
    before, after = data.class_counts, out.class_counts
    print(f"added {len(out) - len(data)} samples: neg {before[0]}->{after[0]}, "
          f"pos {before[1]}->{after[1]} -> {args.output}")
    return EXIT_OK


def cmd_evaluate(args):
    model = models.load_model(args.model)
    test = corpus.load_tsv(args.test)
    print(f"{models.evaluate(model, test):.4f}")
    return EXIT_OK


def _experiment_config(args) -> pipeline.ExperimentConfig:
    sources = []
    if args.pos or args.neg:
        if not (args.pos and args.neg):
            raise ConfigError("--pos and --neg must be given together")
        name = args.name or Path(args.pos).stem.removesuffix(".pos").removesuffix("-pos")
        sources.append(pipeline.DatasetSource(name, "pair", (args.pos, args.neg)))
    for spec in args.tsv or []:
        name, sep, path = spec.partition("=")
        if not sep:
            name, path = Path(spec).stem, spec
        sources.append(pipeline.DatasetSource(name, "tsv", (path,)))
    if not sources:
        raise ConfigError("give --pos/--neg and/or --tsv")
    if len({s.name for s in sources}) != len(sources):
        raise ConfigError("dataset names must be distinct")
    neural = dict(dim=args.dim, epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
                  attn_dim=args.attn, embeddings=args.embeddings)
    overrides = {"cnn": dict(neural, n_filters=args.filters),
                 "rnn": dict(neural, hidden=args.rnn_hidden)}
    vcfg = models.TrainConfig.validator(
        dim=args.dim, hidden=args.validator_hidden, attn_dim=args.attn,
        epochs=args.validator_epochs, batch_size=args.batch_size, lr=args.lr,
        embeddings=args.embeddings,
    )
    return pipeline.ExperimentConfig(
        datasets=sources, irs=args.ir, methods=args.methods, settings=args.settings,
        seeds=args.seeds, global_seed=args.seed, markers=args.markers,
        validator_path=args.validator, validator_config=vcfg, model_overrides=overrides,
        train_fraction=args.train_frac, min_confidence=args.min_confidence,
    )


def cmd_run_experiment(args):
    cfg = _experiment_config(args)

    def progress(cell):
        acc = f"{float(cell.accuracy):.4f}" if cell.error is None else cell.error
        log.info("%s ir=%d %s %s seed=%d: %s", cell.dataset, cell.ir, cell.method,
                 cell.setting, cell.seed, acc)

    table = pipeline.run_experiment(cfg, progress=progress)
    table.write_csv(args.out)
    print(table.pivot(), end="")
    print(f"results -> {args.out}")
    return EXIT_CELLS if table.has_errors else EXIT_OK


def cmd_synth(args):
    spec = synthetic.CorpusSpec(n_pos=args.n_pos, n_neg=args.n_neg,
                                neutral_head_rate=args.neutral_head_rate,
                                transition_rate=args.transition_rate)
    data, _ = synthetic.generate(spec, seed=args.seed)
    if args.tsv:
        corpus.write_tsv(data, args.tsv)
    if args.pos and args.neg:
        synthetic.write_pair(data, args.pos, args.neg)
    if not args.tsv and not (args.pos and args.neg):
        raise ConfigError("give --tsv and/or --pos/--neg")
    print(f"wrote {len(data)} synthetic samples")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="discaug", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-validator", help="pretrain the attention-BiLSTM validator")
    p.add_argument("--input", required=True, help="labeled TSV corpus")
    p.add_argument("--dev", help="optional TSV for best-epoch selection")
    p.add_argument("--out", required=True)
    _add_neural_flags(p, hidden_default=32)
    p.set_defaults(func=cmd_train_validator)

    p = sub.add_parser("train", help="train any classifier to a checkpoint")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", type=models.ClassifierKind.parse, default=models.ClassifierKind.NB)
    p.add_argument("--oversample", action="store_true", help="balance classes before training")
    p.add_argument("--out", required=True)
    _add_neural_flags(p, hidden_default=256)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("augment", help="add discourse-marker samples to a TSV training set")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--markers", type=_markers, default=MarkerSet())
    p.add_argument("--validator")
    p.add_argument("--no-validate", action="store_true")
    p.add_argument("--min-confidence", type=float, default=0.0)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("evaluate", help="accuracy of a checkpoint on a TSV test set")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run-experiment", help="run the imbalance-ratio experiment grid")
    p.add_argument("--pos", help="positive-class file, one sentence per line")
    p.add_argument("--neg", help="negative-class file, one sentence per line")
    p.add_argument("--name", help="dataset name for --pos/--neg (default: file stem)")
    p.add_argument("--tsv", action="append", help="TSV dataset, optionally NAME=PATH; repeatable")
    p.add_argument("--ir", type=_int_list, default=[5])
    p.add_argument("--methods", type=_csv_list, default=["nb", "lr", "cnn", "rnn"])
    p.add_argument("--settings", type=_csv_list, default=["os", "our+os"])
    p.add_argument("--seeds", type=int, default=1, help="number of replicates")
    p.add_argument("--seed", type=int, default=0, help="global seed")
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--markers", type=_markers, default=MarkerSet())
    p.add_argument("--validator", help="pretrained validator checkpoint; trained per replicate if absent")
    p.add_argument("--min-confidence", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--attn", type=int, default=16)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--filters", type=int, default=100, help="CNN filters per width")
    p.add_argument("--rnn-hidden", type=int, default=256)
    p.add_argument("--validator-hidden", type=int, default=32)
    p.add_argument("--validator-epochs", type=int, default=10)
    p.add_argument("--embeddings")
    p.set_defaults(func=cmd_run_experiment)

    p = sub.add_parser("synth", help="write a synthetic planted-lexicon corpus")
    p.add_argument("--n-pos", type=int, default=5331)
    p.add_argument("--n-neg", type=int, default=5331)
    p.add_argument("--transition-rate", type=float, default=0.25)
    p.add_argument("--neutral-head-rate", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tsv")
    p.add_argument("--pos")
    p.add_argument("--neg")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DivergenceError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
