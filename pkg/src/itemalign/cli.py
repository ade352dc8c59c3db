"""Command-line pipeline: corpora in, deterministic report artifacts out.

One JSON config document drives every command; the common flags
(``--seed``, ``--out``, ``--level``, ...) override matching config keys.
Each invocation appends one record to ``<out>/manifest.jsonl`` holding the
fully resolved configuration and a SHA-256 per artifact, so reruns can be
audited byte for byte.  Commands never write timestamps and never mutate
their inputs; artifact names are fixed functions of the configuration.

Exit codes: 0 success, 1 validation error, 2 I/O error.  All diagnostics
are single lines on stderr.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import sys
from pathlib import Path
from typing import Sequence

from .classifiers import (
    MODEL_NAMES,
    display_name,
    load_model,
    save_model,
    spec_from_name,
    train,
)
from .corpus import (
    DEFAULT_CONDITIONS,
    InputCondition,
    compose_input,
    parse_corpus,
    stratified_split,
    summarize,
    write_corpus,
    write_split,
)
from .diagnostics import (
    GridSpec,
    GroupIndex,
    GroupSelector,
    cosine_table,
    isomap_project,
    kl_table,
    pca_project,
    render_kl_csv,
    render_kl_markdown,
    render_projection_csv,
    render_similarity_csv,
    render_similarity_markdown,
    scatter_svg,
    tsne_project,
)
from .embeddings import PlantedConfig, read_embeddings, synthetic_embeddings, write_embeddings
from .experiments import (
    AblationGrid,
    CrossTestSpec,
    build_dataset,
    default_sizes,
    render_ablation_csv,
    render_ablation_markdown,
    run_ablation,
    run_generalization,
    run_model_comparison,
    split_datasets,
)
from .metrics import (
    confusion_csv,
    evaluate,
    per_class_f1_table,
    render_report_csv,
    render_report_markdown,
    render_table_csv,
)

MANIFEST_NAME = "manifest.jsonl"

# Full configuration surface with defaults.  The seed default is a fixed
# constant, never wall-clock derived, so an empty config is reproducible.
DEFAULTS: dict = {
    "out": "out",
    "seed": 0,
    "level": "skill",
    "fractions": [0.6, 0.2, 0.2],
    "token_budget": 512,
    "condition": "prompt_table_figure_options",
    "conditions": None,
    "workers": 1,
    "corpus": None,
    "corpus_name": None,
    "corpora": None,
    "embeddings": None,
    "embeddings_by_condition": None,
    "embeddings_by_corpus": None,
    "sizes": None,
    "model": {"name": "softmax_regression"},
    "models": None,
    "model_file": None,
    "split": "test",
    "train_corpus": None,
    "test_corpus": None,
    "pairs": None,
    "kl_source": None,
    "kl_targets": None,
    "density": {"bins": [50, 50], "sigma": 2.0, "epsilon": 1e-10,
                "padding": 0.05, "pca_dim": 2},
    "projection": {"method": "pca", "dim": 2, "perplexity": 30.0,
                   "iterations": 1000, "learning_rate": 200.0, "k_neighbors": 10},
    "planted": {"classes_from": "skill", "dim": 64, "separation": 10.0,
                "noise": 1.0, "overlap": [], "seed": None, "provider": "synthetic"},
}

_FLAG_KEYS = ("seed", "out", "level", "condition", "workers", "token_budget")


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


class ArtifactWriter:
    """Writes artifacts under the output directory and hashes each one.

    Inputs registered through `track_input` may never coincide with an
    output path; that keeps every command non-destructive by construction.
    """

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.artifacts: dict[str, str] = {}
        self.inputs: set[Path] = set()

    def track_input(self, path: str | Path) -> Path:
        p = Path(path)
        self.inputs.add(p.resolve())
        return p

    def read_input(self, path: str | Path) -> str:
        return self.track_input(path).read_text(encoding="utf-8")

    def _target(self, name: str) -> Path:
        path = self.out_dir / name
        if path.resolve() in self.inputs:
            raise ConfigError(f"output {name!r} would overwrite an input file")
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def path_for(self, name: str) -> Path:
        """Reserve an output path for a writer that produces its own file."""
        return self._target(name)

    def write_text(self, name: str, text: str) -> Path:
        path = self._target(name)
        path.write_text(text, encoding="utf-8")
        self.artifacts[name] = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return path

    def add_file(self, name: str) -> None:
        digest = hashlib.sha256((self.out_dir / name).read_bytes()).hexdigest()
        self.artifacts[name] = digest

    def append_manifest(self, command: str, config: dict) -> None:
        record = {"command": command, "config": config, "artifacts": self.artifacts}
        line = json.dumps(record, sort_keys=True)
        with open(self.out_dir / MANIFEST_NAME, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")


# -- Configuration resolution ----------------------------------------------------


# Nested sections whose keys are fixed; 'model'/'models' entries stay opaque
# because their extra keys are model-specific hyperparameter overrides.
_NESTED_SECTIONS = ("density", "projection", "planted")


def _merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if key not in merged:
            raise ConfigError(f"unknown config key {key!r}")
        if key in _NESTED_SECTIONS and isinstance(value, dict):
            for sub, sub_value in value.items():
                if sub not in merged[key]:
                    raise ConfigError(f"unknown config key {key!r}.{sub!r}")
                merged[key][sub] = sub_value
        else:
            merged[key] = value
    return merged


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if args.config is not None:
        text = Path(args.config).read_text(encoding="utf-8")
        loaded = json.loads(text)
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg = _merge(cfg, loaded)
    for key in _FLAG_KEYS:
        value = getattr(args, key)
        if value is not None:
            cfg[key] = value
    for key in ("seed", "workers", "token_budget"):
        if not isinstance(cfg[key], int) or isinstance(cfg[key], bool):
            raise ConfigError(f"{key} must be an integer, got {cfg[key]!r}")
    if cfg["seed"] < 0:
        raise ConfigError(f"seed must be nonnegative, got {cfg['seed']}")
    if cfg["workers"] < 1:
        raise ConfigError("workers must be positive")
    if cfg["level"] not in ("domain", "skill"):
        raise ConfigError(f"level must be 'domain' or 'skill', got {cfg['level']!r}")
    if len(cfg["fractions"]) != 3:
        raise ConfigError("fractions must list three ratios (train, validation, test)")
    return cfg


def _require(cfg: dict, key: str, command: str):
    value = cfg.get(key)
    if value is None:
        raise ConfigError(f"'{command}' requires config key {key!r}")
    return value


def _corpus_stem(path: str) -> str:
    return Path(path).name.split(".")[0]


def _load_corpus(cfg: dict, writer: ArtifactWriter, command: str):
    path = _require(cfg, "corpus", command)
    name = cfg.get("corpus_name") or _corpus_stem(path)
    cfg["corpus_name"] = name
    return parse_corpus(writer.read_input(path), name=name)


def _load_embeddings(cfg: dict, writer: ArtifactWriter, command: str):
    path = _require(cfg, "embeddings", command)
    return read_embeddings(writer.read_input(path))


def _model_spec(entry, context: str):
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError(f"{context} must be an object with a 'name' key")
    options = dict(entry)
    name = options.pop("name")
    try:
        return spec_from_name(name, **options)
    except TypeError as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def _selector(entry, context: str) -> GroupSelector:
    if not (isinstance(entry, (list, tuple)) and len(entry) == 3):
        raise ConfigError(f"{context} must be [corpus, level, label]")
    corpus, level, label = entry
    return GroupSelector(corpus=str(corpus), level=str(level), label=int(label))


def _group_index(cfg: dict, writer: ArtifactWriter, command: str) -> GroupIndex:
    corpora = _require(cfg, "corpora", command)
    emb_paths = _require(cfg, "embeddings_by_corpus", command)
    sources = {}
    for name, path in corpora.items():
        if name not in emb_paths:
            raise ConfigError(f"no embeddings path for corpus {name!r}")
        corpus = parse_corpus(writer.read_input(path), name=name)
        embs = read_embeddings(writer.read_input(emb_paths[name]))
        sources[name] = (corpus, embs)
    return GroupIndex(sources)


def _label_names(corpus, level: str) -> dict[str, str]:
    if level == "domain":
        return {it.id: corpus.scheme.domains[it.domain - 1] for it in corpus.items}
    return {it.id: corpus.scheme.skills[it.skill - 1] for it in corpus.items}


# -- Command handlers --------------------------------------------------------------


def cmd_ingest(cfg: dict, writer: ArtifactWriter) -> None:
    corpus = _load_corpus(cfg, writer, "ingest")
    writer.write_text(f"{corpus.name}.corpus.jsonl", write_corpus(corpus))


def cmd_summarize(cfg: dict, writer: ArtifactWriter) -> None:
    corpus = _load_corpus(cfg, writer, "summarize")
    summary = summarize(corpus)
    rows = [["level", "label", "count"]]
    for name, count in zip(corpus.scheme.skills, summary.skill_counts):
        rows.append(["skill", name, str(count)])
    for name, count in zip(corpus.scheme.domains, summary.domain_counts):
        rows.append(["domain", name, str(count)])
    rows.append(["total", "all", str(summary.total)])
    writer.write_text(f"{corpus.name}.summary.csv", render_table_csv(rows))


def cmd_compose(cfg: dict, writer: ArtifactWriter) -> None:
    corpus = _load_corpus(cfg, writer, "compose")
    condition = InputCondition.from_name(cfg["condition"])
    lines = []
    for item in corpus.items:
        composed = compose_input(item, condition, token_budget=cfg["token_budget"])
        lines.append(json.dumps({
            "id": composed.item_id,
            "condition": composed.condition.value,
            "text": composed.text,
            "token_count": composed.token_count,
            "truncated": composed.truncated,
        }, sort_keys=True))
    writer.write_text(f"{corpus.name}.{condition.value}.composed.jsonl",
                      "\n".join(lines) + "\n")


def cmd_split(cfg: dict, writer: ArtifactWriter) -> None:
    corpus = _load_corpus(cfg, writer, "split")
    assignment = stratified_split(corpus, fractions=tuple(cfg["fractions"]),
                                  seed=cfg["seed"], stratify_by=cfg["level"])
    writer.write_text(f"{corpus.name}.split.jsonl", write_split(assignment))


def cmd_embed_synthetic(cfg: dict, writer: ArtifactWriter) -> None:
    corpus = _load_corpus(cfg, writer, "embed-synthetic")
    condition = InputCondition.from_name(cfg["condition"])
    planted = cfg["planted"]
    if planted["seed"] is None:
        planted["seed"] = cfg["seed"]
    classes_from = planted["classes_from"]
    if classes_from == "skill":
        class_of = {it.id: it.skill for it in corpus.items}
        n_classes = 10
    elif classes_from == "domain":
        class_of = {it.id: it.domain for it in corpus.items}
        n_classes = 4
    else:
        raise ConfigError(f"planted.classes_from must be 'skill' or 'domain', "
                          f"got {classes_from!r}")
    config = PlantedConfig(
        n_classes=n_classes,
        dim=int(planted["dim"]),
        class_separation=float(planted["separation"]),
        noise_sigma=float(planted["noise"]),
        overlap_pairs=tuple((int(a), int(b), float(s)) for a, b, s in planted["overlap"]),
        seed=planted["seed"],
    )
    embs = synthetic_embeddings([it.id for it in corpus.items], config, class_of,
                                provider=planted["provider"], condition=condition.value)
    writer.write_text(f"{corpus.name}.{condition.value}.embeddings.txt",
                      write_embeddings(embs))


def cmd_train(cfg: dict, writer: ArtifactWriter) -> None:
    corpus = _load_corpus(cfg, writer, "train")
    embeddings = _load_embeddings(cfg, writer, "train")
    spec = _model_spec(cfg["model"], "config key 'model'")
    train_d, val_d, _ = split_datasets(corpus, embeddings, cfg["level"],
                                       seed=cfg["seed"],
                                       fractions=tuple(cfg["fractions"]))
    if train_d is None:
        raise ConfigError("the train split is empty; adjust fractions")
    model = train(spec, train_d, validation=val_d)
    name = f"{cfg['model']['name']}.model.json"
    save_model(model, writer.path_for(name))
    writer.add_file(name)


def cmd_evaluate(cfg: dict, writer: ArtifactWriter) -> None:
    corpus = _load_corpus(cfg, writer, "evaluate")
    embeddings = _load_embeddings(cfg, writer, "evaluate")
    model_path = _require(cfg, "model_file", "evaluate")
    model = load_model(writer.track_input(model_path))
    which = cfg["split"]
    if which == "all":
        ids = None
    elif which in ("train", "validation", "test"):
        assignment = stratified_split(corpus, fractions=tuple(cfg["fractions"]),
                                      seed=cfg["seed"], stratify_by=cfg["level"])
        ids = assignment.ids_of(which)
        if not ids:
            raise ConfigError(f"the {which} split is empty; adjust fractions")
    else:
        raise ConfigError(f"split must be train|validation|test|all, got {which!r}")
    data = build_dataset(corpus, embeddings, cfg["level"], ids)
    if tuple(model.class_names) != data.class_names:
        raise ConfigError("model class names do not match the corpus at this level")
    pred = model.predict(data.features)
    report = evaluate(data.labels, pred.labels, data.class_names)
    reports = {display_name(model.spec): report}
    writer.write_text("evaluation.csv", render_report_csv(reports))
    writer.write_text("evaluation_confusion.csv", confusion_csv(report.confusion))


def cmd_ablate(cfg: dict, writer: ArtifactWriter) -> None:
    corpus = _load_corpus(cfg, writer, "ablate")
    emb_paths = _require(cfg, "embeddings_by_condition", "ablate")
    if cfg["conditions"] is None:
        conditions = DEFAULT_CONDITIONS
        cfg["conditions"] = [c.value for c in conditions]
    else:
        conditions = tuple(InputCondition.from_name(c) for c in cfg["conditions"])
    if cfg["sizes"] is None:
        cfg["sizes"] = list(default_sizes(len(corpus)))
    sizes = tuple(int(s) for s in cfg["sizes"])
    embeddings = {}
    for name, path in emb_paths.items():
        embeddings[InputCondition.from_name(name)] = read_embeddings(writer.read_input(path))
    spec = _model_spec(cfg["model"], "config key 'model'")
    grid = AblationGrid(sizes=sizes, conditions=conditions, level=cfg["level"],
                        model=spec, seed=cfg["seed"],
                        fractions=tuple(cfg["fractions"]))
    cells = run_ablation(grid, corpus, embeddings, workers=cfg["workers"])
    writer.write_text("ablation.csv", render_ablation_csv(cells))
    writer.write_text("ablation.md", render_ablation_markdown(cells))


def cmd_compare(cfg: dict, writer: ArtifactWriter) -> None:
    corpus = _load_corpus(cfg, writer, "compare")
    embeddings = _load_embeddings(cfg, writer, "compare")
    if cfg["models"] is None:
        cfg["models"] = [{"name": n} for n in MODEL_NAMES]
    specs = [_model_spec(m, "config key 'models'") for m in cfg["models"]]
    train_d, val_d, test_d = split_datasets(corpus, embeddings, cfg["level"],
                                            seed=cfg["seed"],
                                            fractions=tuple(cfg["fractions"]))
    if train_d is None or test_d is None:
        raise ConfigError("train or test split is empty; adjust fractions")
    reports = run_model_comparison(specs, train_d, test_d, validation=val_d,
                                   workers=cfg["workers"])
    writer.write_text("comparison.csv", render_report_csv(reports))
    writer.write_text("comparison.md", render_report_markdown(reports))
    writer.write_text("per_class_f1.csv", render_table_csv(per_class_f1_table(reports)))


def cmd_generalize(cfg: dict, writer: ArtifactWriter) -> None:
    corpora_paths = _require(cfg, "corpora", "generalize")
    emb_paths = _require(cfg, "embeddings_by_corpus", "generalize")
    train_name = _require(cfg, "train_corpus", "generalize")
    test_name = _require(cfg, "test_corpus", "generalize")
    if cfg["models"] is None:
        cfg["models"] = [{"name": "softmax_regression"}]
    specs = tuple(_model_spec(m, "config key 'models'") for m in cfg["models"])
    corpora = {}
    embeddings = {}
    for name, path in corpora_paths.items():
        corpora[name] = parse_corpus(writer.read_input(path), name=name)
        if name not in emb_paths:
            raise ConfigError(f"no embeddings path for corpus {name!r}")
        embeddings[name] = read_embeddings(writer.read_input(emb_paths[name]))
    spec = CrossTestSpec(train_corpus=train_name, test_corpus=test_name,
                         level=cfg["level"], models=specs, seed=cfg["seed"],
                         fractions=tuple(cfg["fractions"]))
    result = run_generalization(spec, corpora, embeddings)
    writer.write_text("generalization_internal.csv", render_report_csv(result.internal))
    writer.write_text("generalization_external.csv", render_report_csv(result.external))


def cmd_diagnose_cosine(cfg: dict, writer: ArtifactWriter) -> None:
    index = _group_index(cfg, writer, "diagnose-cosine")
    raw_pairs = _require(cfg, "pairs", "diagnose-cosine")
    pairs = []
    for entry in raw_pairs:
        if not (isinstance(entry, (list, tuple)) and len(entry) == 2):
            raise ConfigError("each pairs entry must be [[corpus, level, label], "
                              "[corpus, level, label]]")
        pairs.append((_selector(entry[0], "pairs"), _selector(entry[1], "pairs")))
    table = cosine_table(pairs, index)
    writer.write_text("cosine.csv", render_similarity_csv(table))
    writer.write_text("cosine.md", render_similarity_markdown(table))


def cmd_diagnose_kl(cfg: dict, writer: ArtifactWriter) -> None:
    index = _group_index(cfg, writer, "diagnose-kl")
    source = _selector(_require(cfg, "kl_source", "diagnose-kl"), "kl_source")
    targets = [_selector(t, "kl_targets")
               for t in _require(cfg, "kl_targets", "diagnose-kl")]
    density = cfg["density"]
    grid = GridSpec(bins_x=int(density["bins"][0]), bins_y=int(density["bins"][1]),
                    sigma=float(density["sigma"]), epsilon=float(density["epsilon"]),
                    padding=float(density["padding"]))
    table = kl_table(source, targets, index, grid=grid,
                     pca_dim=int(density["pca_dim"]))
    writer.write_text("kl.csv", render_kl_csv(table))
    writer.write_text("kl.md", render_kl_markdown(table))


def cmd_project(cfg: dict, writer: ArtifactWriter) -> None:
    corpus = _load_corpus(cfg, writer, "project")
    embeddings = _load_embeddings(cfg, writer, "project")
    missing = [it.id for it in corpus.items if it.id not in embeddings.records]
    if missing:
        raise ConfigError(f"no embedding for item {missing[0]!r} "
                          f"({len(missing)} missing in total)")
    embeddings = embeddings.subset([it.id for it in corpus.items])
    proj = cfg["projection"]
    method = proj["method"]
    if method == "pca":
        result = pca_project(embeddings, out_dim=int(proj["dim"]))
    elif method == "tsne":
        result = tsne_project(embeddings, perplexity=float(proj["perplexity"]),
                              iterations=int(proj["iterations"]),
                              learning_rate=float(proj["learning_rate"]),
                              seed=cfg["seed"])
    elif method == "isomap":
        result = isomap_project(embeddings, k_neighbors=int(proj["k_neighbors"]),
                                out_dim=int(proj["dim"]))
    else:
        raise ConfigError(f"projection.method must be pca|tsne|isomap, got {method!r}")
    labels = _label_names(corpus, cfg["level"])
    writer.write_text(f"projection_{method}.csv",
                      render_projection_csv(result, labels))
    writer.write_text(f"projection_{method}.svg",
                      scatter_svg(result, labels, title=f"{method} ({corpus.name})"))


def cmd_report(cfg: dict, writer: ArtifactWriter) -> None:
    manifest = writer.track_input(writer.out_dir / MANIFEST_NAME)
    records = []
    for n, line in enumerate(manifest.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"manifest line {n} is not valid JSON: {exc}") from exc
    lines = ["# Run report", ""]
    for n, rec in enumerate(records, start=1):
        lines.append(f"## {n}. {rec.get('command', '?')}")
        lines.append("")
        lines.append("```json")
        lines.append(json.dumps(rec.get("config", {}), sort_keys=True, indent=2))
        lines.append("```")
        lines.append("")
        artifacts = rec.get("artifacts", {})
        if artifacts:
            lines.append("| Artifact | SHA-256 |")
            lines.append("|---|---|")
            for name in sorted(artifacts):
                lines.append(f"| {name} | {artifacts[name]} |")
            lines.append("")
    writer.write_text("report.md", "\n".join(lines).rstrip() + "\n")


_COMMANDS = {
    "ingest": (cmd_ingest, "Validate an item file and write the normalized corpus."),
    "summarize": (cmd_summarize, "Per-skill and per-domain item counts as CSV."),
    "compose": (cmd_compose, "Render classifier input text under one condition."),
    "split": (cmd_split, "Seeded stratified train/validation/test assignment."),
    "embed-synthetic": (cmd_embed_synthetic,
                        "Planted-cluster embeddings for every corpus item."),
    "train": (cmd_train, "Fit one model on the train split and save it."),
    "evaluate": (cmd_evaluate, "Score a saved model on a chosen split."),
    "ablate": (cmd_ablate, "Train-set size x input condition grid."),
    "compare": (cmd_compare, "Train and score several models on one split."),
    "generalize": (cmd_generalize, "Train on one corpus, test on another."),
    "diagnose-cosine": (cmd_diagnose_cosine,
                        "Average pairwise cosine between label groups."),
    "diagnose-kl": (cmd_diagnose_kl,
                    "KL divergence between projected group densities."),
    "project": (cmd_project, "2D embedding projection as CSV and SVG."),
    "report": (cmd_report, "Render the manifest as a markdown audit report."),
}


def _parse_args(argv: Sequence[str] | None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="itemalign",
        description="Deterministic item-alignment experiment pipeline.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in _COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", help="JSON config file")
        sub.add_argument("--seed", type=int, help="master seed (fixed default 0)")
        sub.add_argument("--out", help="output directory")
        sub.add_argument("--level", choices=("domain", "skill"),
                         help="label level for datasets and splits")
        sub.add_argument("--condition", help="input condition name")
        sub.add_argument("--workers", type=int, help="parallel cell workers")
        sub.add_argument("--token-budget", type=int, dest="token_budget",
                         help="token budget for truncation accounting")
    return parser.parse_args(argv)


def _fail(exc: Exception, code: int) -> int:
    message = " ".join(str(exc).split()) or exc.__class__.__name__
    print(f"error: {message}", file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = _parse_args(argv)
    try:
        cfg = resolve_config(args)
        writer = ArtifactWriter(Path(cfg["out"]))
        writer.out_dir.mkdir(parents=True, exist_ok=True)
        handler, _ = _COMMANDS[args.command]
        handler(cfg, writer)
        writer.append_manifest(args.command, cfg)
    except OSError as exc:
        return _fail(exc, 2)
    except ValueError as exc:
        return _fail(exc, 1)
    for name in writer.artifacts:
        print(f"wrote {writer.out_dir / name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
