"""Command-line entry point: synth, quantify, analyze, classify, report.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 internal
error. Every run writes a report.json into --out embedding the run
configuration (paths reduced to basenames so artifacts are
location-independent) and sha256 hashes of the inputs. All outputs are
byte-deterministic for a fixed seed; the seed falls back to $CUELOAD_SEED.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import classify as clf
from . import corpus, lm, pipeline, stats, synth
from .errors import CorpusWarning, CueloadError

_SETTINGS = ("text", "text+cues")
_CLASSIFIERS = ("forest", "boosted", "fusion")


class UsageError(Exception):
    """Bad flag combination or value; mapped to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _env_seed() -> int:
    try:
        return int(os.environ.get("CUELOAD_SEED", "0"))
    except ValueError:
        return 0


def _add_common(parser, with_corpus=True):
    parser.add_argument("--config", help="key = value config file; flags win")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=_env_seed())
    if with_corpus:
        parser.add_argument("--transcripts", help="CoNLL-U transcript file")
        parser.add_argument("--gaze", help="gaze CSV (optional; absence degrades gracefully)")
        parser.add_argument("--annotations", help="annotation CSV")
        parser.add_argument("--lambda", dest="lam", type=float, default=0.5,
                            help="length/depth blend of the complexity score")
        parser.add_argument("--ngram-order", type=int, default=2)
        parser.add_argument("--gaze-order", type=int, default=3)
        parser.add_argument("--smoothing-k", type=float, default=0.1)
        parser.add_argument("--text-scope", choices=("explainer", "both"), default="explainer")
        parser.add_argument("--logprobs", help="imported token-logprob JSONL")
        parser.add_argument("--gaze-logprobs", help="imported gaze-logprob JSONL")


def build_parser() -> _Parser:
    parser = _Parser(prog="cueload", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    _add_common(p, with_corpus=False)
    p.add_argument("--dialogues", type=int, default=6)
    p.add_argument("--utterances", type=int, default=24)
    p.add_argument("--vocab", type=int, default=80)
    p.add_argument("--info-signal", type=float, default=0.0)
    p.add_argument("--gaze-signal", type=float, default=0.0)
    p.add_argument("--sc-signal", type=float, default=0.0)
    p.add_argument("--adl-signal", type=float, default=0.0)
    p.add_argument("--gaze-rate", type=float, default=5.0)
    p.add_argument("--explainer-fraction", type=float, default=0.8)
    p.add_argument("--annotate-fraction", type=float, default=1.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("quantify", help="compute the four cue values per window")
    _add_common(p)
    p.add_argument("--impute", default="drop", help="drop | mean | constant:<c>")
    p.add_argument("--paper-parity", action="store_true",
                   help="(recorded for downstream runs; the feature table always "
                        "normalizes over the full record set)")
    p.set_defaults(func=cmd_quantify)

    p = sub.add_parser("analyze", help="rank tests and boxplot data per cue")
    _add_common(p)
    p.add_argument("--impute", default="drop", help="drop | mean | constant:<c>")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("classify", help="train and evaluate the classifiers")
    _add_common(p)
    p.add_argument("--impute", default="mean", help="drop | mean | constant:<c>")
    p.add_argument("--split-ratio", type=float, default=0.7)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--classifiers", default="forest,boosted,fusion")
    p.add_argument("--embeddings", help="imported utterance-embedding JSONL")
    p.add_argument("--paper-parity", action="store_true",
                   help="fit normalization/imputation on the full dataset instead "
                        "of training folds")
    p.add_argument("--include-adl", action="store_true",
                   help="re-include dependency length in the cue block (ablation)")
    p.add_argument("--trees", type=int, default=30)
    p.add_argument("--max-depth", type=int, default=10)
    p.add_argument("--rounds", type=int, default=25)
    p.add_argument("--boost-depth", type=int, default=3)
    p.add_argument("--learning-rate", type=float, default=0.3)
    p.add_argument("--fusion-epochs", type=int, default=300)
    p.add_argument("--fusion-lr", type=float, default=0.5)
    p.add_argument("--max-features", type=int, default=300, help="TF-IDF vocabulary cap")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("report", help="merge prior run reports into one JSON")
    _add_common(p, with_corpus=False)
    p.add_argument("runs", nargs="+", help="output directories of prior commands")
    p.set_defaults(func=cmd_report)
    return parser


def _read_config_file(path: str) -> dict[str, str]:
    """Parse a `key = value` config file; '#' starts a comment line."""
    file = Path(path)
    if not file.exists():
        raise UsageError(f"config file not found: {path}")
    values: dict[str, str] = {}
    for raw in file.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"config file {path}: expected key = value, got {line!r}")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip().strip('"')
    return values


def _overlay_config(args, config: dict[str, str], argv: list[str]) -> None:
    """Fill args from the config file for flags not given on the command line."""
    given = set()
    for item in argv:
        if item.startswith("--"):
            given.add(item[2:].split("=", 1)[0].replace("-", "_"))
    for key, raw in config.items():
        if key in given or not hasattr(args, key):
            continue
        current = getattr(args, key)
        if isinstance(current, bool):
            value: object = raw.lower() in ("1", "true", "yes", "on")
        elif isinstance(current, int):
            value = int(raw)
        elif isinstance(current, float):
            value = float(raw)
        else:
            value = raw
        setattr(args, key, value)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "config", None):
            _overlay_config(args, _read_config_file(args.config), argv)
        return args.func(args)
    except UsageError as exc:
        print(f"cueload: usage error: {exc}", file=sys.stderr)
        return 1
    except CueloadError as exc:
        print(f"cueload: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - internal failure contract
        print(f"cueload: internal error: {exc!r}", file=sys.stderr)
        return 3


# ---------------------------------------------------------------------------
# shared plumbing


def _require(args, *names):
    for name in names:
        if not getattr(args, name, None):
            raise UsageError(f"--{name.replace('_', '-')} is required")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _config_dict(args) -> dict:
    skip = {"func", "command", "config"}
    path_keys = {"transcripts", "gaze", "annotations", "logprobs",
                 "gaze_logprobs", "embeddings", "out"}
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in skip:
            continue
        if key in path_keys and value:
            value = Path(value).name
        if key == "runs":
            value = [Path(v).name for v in value]
        out[key] = value
    return out


def _write_report(out_dir: Path, command: str, args, payload: dict, hashes: dict):
    report = {
        "command": command,
        "config": _config_dict(args),
        "input_hashes": hashes,
    }
    report.update(payload)
    (out_dir / "report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _parse_impute(spec: str) -> tuple[str, float]:
    if spec.startswith("constant:"):
        return "constant", float(spec.split(":", 1)[1])
    if spec in ("drop", "mean", "constant"):
        return spec, 0.5
    raise UsageError(f"unknown impute policy {spec!r}")


def _load_inputs(args):
    """Parse corpus inputs; a missing gaze file degrades with a warning."""
    _require(args, "transcripts", "annotations")
    hashes = {}
    transcripts = Path(args.transcripts)
    if not transcripts.exists():
        raise CueloadError(f"transcript file not found: {transcripts}")
    hashes["transcripts"] = _sha256(transcripts)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        utterances = corpus.parse_conllu(transcripts.read_bytes())
    skipped = sum(1 for w in caught if issubclass(w.category, CorpusWarning))

    annotations_path = Path(args.annotations)
    if not annotations_path.exists():
        raise CueloadError(f"annotation file not found: {annotations_path}")
    hashes["annotations"] = _sha256(annotations_path)
    annotations = corpus.parse_annotations(annotations_path.read_bytes())

    gaze = {}
    if args.gaze:
        gaze_path = Path(args.gaze)
        if gaze_path.exists():
            hashes["gaze"] = _sha256(gaze_path)
            gaze = corpus.parse_gaze(gaze_path.read_bytes())
        else:
            print(f"cueload: warning: gaze file {gaze_path} not found; "
                  "gaze entropy will be missing", file=sys.stderr)
    return utterances, annotations, gaze, skipped, hashes


def _quantify_all(args, utterances, annotations, gaze, hashes):
    """Windows, word/gaze models or imports, quantified + normalized records."""
    windows = corpus.build_context_windows(utterances, annotations, gaze)

    word_imports = gaze_imports = None
    word_model = gaze_model = None
    if args.logprobs:
        path = Path(args.logprobs)
        if not path.exists():
            raise CueloadError(f"logprob file not found: {path}")
        hashes["logprobs"] = _sha256(path)
        corpus_tokens = {
            (u.dialogue_id, u.id): lm.normalize_tokens(u) for u in utterances
        }
        word_imports = lm.import_logprobs(path.read_bytes(), corpus_tokens)
    else:
        word_model = lm.train_word_ngram(utterances, args.ngram_order, args.smoothing_k)
    if args.gaze_logprobs:
        path = Path(args.gaze_logprobs)
        if not path.exists():
            raise CueloadError(f"gaze logprob file not found: {path}")
        hashes["gaze_logprobs"] = _sha256(path)
        gaze_imports = lm.import_gaze_logprobs(path.read_bytes())
    elif gaze:
        sequences = [[s.label for s in samples] for _, samples in sorted(gaze.items())]
        gaze_model = lm.train_gaze_ngram(sequences, args.gaze_order, args.smoothing_k)

    records = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CorpusWarning)
        for window in windows:
            records.append(
                pipeline.quantify(
                    window,
                    word_model=word_model,
                    gaze_model=gaze_model,
                    lam=args.lam,
                    text_scope=args.text_scope,
                    word_imports=word_imports,
                    gaze_imports=gaze_imports,
                )
            )
        pipeline.minmax_normalize(records)
    return windows, records, word_model, gaze_model


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = synth.GeneratorConfig(
        n_dialogues=args.dialogues,
        utterances_per_dialogue=args.utterances,
        vocab_size=args.vocab,
        info_signal=args.info_signal,
        gaze_signal=args.gaze_signal,
        sc_signal=args.sc_signal,
        adl_signal=args.adl_signal,
        gaze_rate_hz=args.gaze_rate,
        explainer_fraction=args.explainer_fraction,
        annotate_fraction=args.annotate_fraction,
        seed=args.seed,
    )
    conllu, gaze_csv, ann_csv = synth.generate_corpus(config)
    (out_dir / "transcripts.conllu").write_bytes(conllu)
    (out_dir / "gaze.csv").write_bytes(gaze_csv)
    (out_dir / "annotations.csv").write_bytes(ann_csv)
    outputs = {
        name: _sha256(out_dir / name)
        for name in ("transcripts.conllu", "gaze.csv", "annotations.csv")
    }
    _write_report(out_dir, "synth", args, {"output_hashes": outputs}, {})
    print(f"synth: wrote transcripts.conllu, gaze.csv, annotations.csv under {args.out}")
    return 0


def cmd_quantify(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    utterances, annotations, gaze, skipped, hashes = _load_inputs(args)
    _, records, word_model, gaze_model = _quantify_all(
        args, utterances, annotations, gaze, hashes
    )
    policy, const = _parse_impute(args.impute)
    records_out = pipeline.impute_missing(records, policy, const)

    (out_dir / "features.csv").write_text(pipeline.records_to_csv(records_out), encoding="utf-8")
    (out_dir / "features.jsonl").write_text(pipeline.records_to_jsonl(records_out), encoding="utf-8")
    (out_dir / "tokens.jsonl").write_text(pipeline.export_tokens_jsonl(utterances), encoding="utf-8")
    if word_model is not None:
        word_model.save(out_dir / "word_model.json")
    if gaze_model is not None:
        gaze_model.save(out_dir / "gaze_model.json")

    missing_rates = {
        cue: sum(1 for r in records if cue in r.missing) / max(1, len(records))
        for cue in pipeline.CUES
    }
    payload = {
        "windows": len(records),
        "utterances": len(utterances),
        "skipped_token_lines": skipped,
        "state_counts": corpus.state_counts(annotations),
        "missing_rates": missing_rates,
    }
    _write_report(out_dir, "quantify", args, payload, hashes)
    print(f"quantify: {len(records)} windows from {len(utterances)} utterances "
          f"({skipped} skipped token lines)")
    for cue in pipeline.CUES:
        print(f"  missing {cue}: {missing_rates[cue]:.1%}")
    return 0


def cmd_analyze(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    utterances, annotations, gaze, _, hashes = _load_inputs(args)
    _, records, _, _ = _quantify_all(args, utterances, annotations, gaze, hashes)
    policy, const = _parse_impute(args.impute)
    records = pipeline.impute_missing(records, policy, const)

    kruskal_rows, dunn_rows, box_rows = [], [], []
    results_json: dict[str, dict] = {}
    for cue in pipeline.CUES:
        groups, names = [], []
        for state in corpus.STATES:
            values = [
                getattr(r, cue)
                for r in records
                if r.label == state and getattr(r, cue) is not None
            ]
            if values:
                groups.append(values)
                names.append(corpus.CODE_OF_STATE[state])
        if len(groups) < 2:
            print(f"analyze: warning: cue {cue} has <2 populated states; skipped",
                  file=sys.stderr)
            continue
        result = stats.kruskal_wallis(groups, cue=cue)
        kruskal_rows.append(f"{cue},{result.H!r},{result.p!r},{result.eta_squared!r}")
        posthoc = stats.dunn_posthoc(groups, names, cue=cue)
        for d in posthoc:
            dunn_rows.append(
                f"{cue},{d.pair[0]}-{d.pair[1]},{d.z!r},{d.p_raw!r},{d.p_adj!r}"
            )
        for state_code, values in zip(names, groups):
            b = stats.boxplot_stats(values)
            outliers = "|".join(repr(x) for x in b["outliers"])
            box_rows.append(
                f"{cue},{state_code},{b['n']},{b['q1']!r},{b['median']!r},{b['q3']!r},"
                f"{b['whisker_lo']!r},{b['whisker_hi']!r},{outliers}"
            )
        results_json[cue] = {
            "kruskal": {
                "H": result.H,
                "p": result.p,
                "eta_squared": result.eta_squared,
                "group_sizes": list(result.group_sizes),
            },
            "dunn": [
                {"pair": list(d.pair), "z": d.z, "p_raw": d.p_raw, "p_adj": d.p_adj}
                for d in posthoc
            ],
        }

    (out_dir / "kruskal.csv").write_text(
        "cue,H,p,eta2\n" + "".join(r + "\n" for r in kruskal_rows), encoding="utf-8"
    )
    (out_dir / "dunn.csv").write_text(
        "cue,pair,z,p_raw,p_adj\n" + "".join(r + "\n" for r in dunn_rows), encoding="utf-8"
    )
    (out_dir / "boxplots.csv").write_text(
        "cue,state,n,q1,median,q3,whisker_lo,whisker_hi,outliers\n"
        + "".join(r + "\n" for r in box_rows),
        encoding="utf-8",
    )
    _write_report(out_dir, "analyze", args, {"tests": results_json}, hashes)
    for row in kruskal_rows:
        print("analyze:", row)
    return 0


def _cue_fields(include_adl: bool) -> list[str]:
    fields = ["info_value_n", "gaze_entropy_n", "sc_n"]
    if include_adl:
        fields.append("adl_n")
    return fields


def _cue_matrix(records, include_adl: bool) -> np.ndarray:
    rows = []
    for r in records:
        row = []
        for name in _cue_fields(include_adl):
            value = getattr(r, name)
            row.append(0.5 if value is None else value)
        rows.append(row)
    return np.array(rows, dtype=np.float64)


def cmd_classify(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    selected = [c.strip() for c in args.classifiers.split(",") if c.strip()]
    for name in selected:
        if name not in _CLASSIFIERS:
            raise UsageError(f"unknown classifier {name!r}")
    if not selected:
        raise UsageError("no classifier selected")

    utterances, annotations, gaze, _, hashes = _load_inputs(args)
    windows, records, _, _ = _quantify_all(args, utterances, annotations, gaze, hashes)
    policy, const = _parse_impute(args.impute)

    texts = [pipeline.window_text(w, args.text_scope) for w in windows]
    labels = np.array([corpus.STATES.index(r.label) for r in records], dtype=np.int64)

    embeddings = None
    if args.embeddings:
        emb_path = Path(args.embeddings)
        if not emb_path.exists():
            raise CueloadError(f"embedding file not found: {emb_path}")
        hashes["embeddings"] = _sha256(emb_path)
        dim, table = clf.import_embeddings(emb_path.read_bytes())
        rows = []
        for w in windows:
            key = (w.annotation.dialogue_id, w.annotation.utterance_id)
            if key in table:
                rows.append(table[key])
            else:
                print(f"cueload: warning: no embedding for window {w.window_id}; "
                      "using zeros", file=sys.stderr)
                rows.append(np.zeros(dim))
        embeddings = np.vstack(rows)

    def prepared(train_idx):
        """Normalization + imputation scoped to the training subset."""
        fit = None if args.paper_parity else train_idx
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CorpusWarning)
            pipeline.minmax_normalize(records, fit_indices=fit)
        return pipeline.impute_missing(records, policy, const, fit_indices=fit)

    def features_for(setting, train_idx, eval_idx, recs):
        vec = clf.TextVectorizer(max_features=args.max_features)
        vec.fit([texts[i] for i in train_idx])
        blocks_train = [vec.transform([texts[i] for i in train_idx])]
        blocks_eval = [vec.transform([texts[i] for i in eval_idx])]
        if embeddings is not None:
            blocks_train.append(embeddings[train_idx])
            blocks_eval.append(embeddings[eval_idx])
        if setting == "text+cues":
            cues = _cue_matrix(recs, args.include_adl)
            blocks_train.append(cues[train_idx])
            blocks_eval.append(cues[eval_idx])
        return np.hstack(blocks_train), np.hstack(blocks_eval)

    def fit_predict(name, X_train, y_train, X_eval):
        if name == "forest":
            model = clf.train_forest(
                X_train, y_train,
                clf.ForestConfig(n_trees=args.trees, max_depth=args.max_depth,
                                 min_leaf=1, seed=args.seed),
            )
        elif name == "boosted":
            model = clf.train_boosted(
                X_train, y_train,
                clf.BoostConfig(n_rounds=args.rounds, depth=args.boost_depth,
                                learning_rate=args.learning_rate, seed=args.seed),
            )
        else:
            model = clf.FusionModel(
                clf.FusionConfig(learning_rate=args.fusion_lr,
                                 max_epochs=args.fusion_epochs, seed=args.seed)
            ).fit(X_train, y_train, 4)
        return model.predict(X_eval)

    train_idx, test_idx = clf.stratified_split(labels, args.split_ratio, args.seed)

    table_rows = []
    results: dict[str, dict] = {}
    for setting in _SETTINGS:
        for name in selected:
            recs = prepared(train_idx)
            X_train, X_eval = features_for(setting, train_idx, test_idx, recs)
            preds = fit_predict(name, X_train, labels[train_idx], X_eval)
            report = clf.evaluate(preds, labels[test_idx])

            def trainer(fold_train, fold_eval, _setting=setting, _name=name):
                fold_recs = prepared(fold_train)
                X_tr, X_ev = features_for(_setting, fold_train, fold_eval, fold_recs)
                return fit_predict(_name, X_tr, labels[fold_train], X_ev)

            cv = clf.kfold_cv(labels, args.folds, trainer, args.seed)
            report.cv = cv
            results.setdefault(setting, {})[name] = report.to_dict()

            for c, cname in enumerate(report.class_names):
                table_rows.append(
                    f"{setting},{name},class,{cname},{report.precision[c]!r},"
                    f"{report.recall[c]!r},{report.f1[c]!r},,,,"
                )
            table_rows.append(
                f"{setting},{name},holdout,,,,,{report.accuracy!r},,{report.macro_f1!r},"
            )
            table_rows.append(
                f"{setting},{name},cv,,,,,{cv.accuracy_mean!r},{cv.accuracy_sd!r},"
                f"{cv.macro_f1_mean!r},{cv.macro_f1_sd!r}"
            )

            safe_setting = setting.replace("+", "_")
            conf_lines = ["gold\\pred," + ",".join(report.class_names)]
            for gold_name, row in zip(report.class_names, report.confusion):
                conf_lines.append(gold_name + "," + ",".join(str(x) for x in row))
            (out_dir / f"confusion_{name}_{safe_setting}.csv").write_text(
                "\n".join(conf_lines) + "\n", encoding="utf-8"
            )
            print(f"classify: {setting} {name}: holdout acc {report.accuracy:.3f} "
                  f"macro-F1 {report.macro_f1:.3f}; CV {cv.summary()}")

    (out_dir / "table4.csv").write_text(
        "setting,classifier,row,class,precision,recall,f1,"
        "accuracy_mean,accuracy_sd,macro_f1_mean,macro_f1_sd\n"
        + "".join(r + "\n" for r in table_rows),
        encoding="utf-8",
    )
    _write_report(out_dir, "classify", args, {"results": results}, hashes)
    return 0


def cmd_report(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    merged = {"command": "report", "config": _config_dict(args), "runs": {}}
    for run in args.runs:
        path = Path(run) / "report.json"
        if not path.exists():
            raise CueloadError(f"no report.json under {run}")
        payload = json.loads(path.read_text(encoding="utf-8"))
        merged["runs"][payload.get("command", Path(run).name)] = payload
    (out_dir / "report.json").write_text(
        json.dumps(merged, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    print(f"report: merged {len(args.runs)} runs")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
