"""Command-line surface: proto-align <subcommand> --config <path>.

Subcommands: probe-train, probe-eval, align, meta-train, meta-adapt,
meta-eval, synth, report. All outputs land under --out (or the config's
output_dir) together with a manifest.json listing the files each command
produced plus the hash of the effective configuration. Exit codes: 0
success, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import geometry, metalearn, probe, synth, treebank
from .featurestore import StoreError, read_store
from .tensorcore import derive_seed

__all__ = ["main", "ConfigError", "DataError", "NumericError"]

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

CACHE_ENV = "PROTO_ALIGN_CACHE"


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


class NumericError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


def _load_config(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        config = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    return config


def _require(config: dict, key: str, kind=dict):
    if key not in config:
        raise ConfigError(f"config is missing the {key!r} section")
    value = config[key]
    if not isinstance(value, kind):
        raise ConfigError(f"config section {key!r} must be a {kind.__name__}")
    return value


def _check_range(section: str, values: dict, rules: dict) -> None:
    for key, (low, high) in rules.items():
        if key not in values:
            continue
        v = values[key]
        if not isinstance(v, (int, float)) or not low <= v <= high:
            raise ConfigError(
                f"{section}.{key} = {v!r} outside the allowed range "
                f"[{low}, {high}]")


def _languages(config: dict) -> list[str]:
    data = _require(config, "data")
    treebanks = _require(data, "treebanks")
    langs = config.get("languages")
    if langs is None:
        langs = sorted(treebanks)
    return list(langs)


def _data_paths(config: dict, lang: str, split: str):
    data = _require(config, "data")
    treebanks = _require(data, "treebanks")
    stores = _require(data, "stores")
    if lang not in treebanks or split not in treebanks[lang]:
        raise ConfigError(f"no treebank configured for {lang}/{split}")
    if lang not in stores or split not in stores[lang]:
        raise ConfigError(f"no feature store configured for {lang}/{split}")
    tb = Path(treebanks[lang][split])
    st = Path(stores[lang][split])
    for p in (tb, st):
        if not p.exists():
            raise ConfigError(f"configured path does not exist: {p}")
    return tb, st


def _has_split(config: dict, lang: str, split: str) -> bool:
    data = config.get("data", {})
    return (split in data.get("treebanks", {}).get(lang, {})
            and split in data.get("stores", {}).get(lang, {}))


def _config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _cache_dir(out_dir: Path) -> Path:
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else out_dir / "cache"


# ---------------------------------------------------------------------------
# dataset loading with a small on-disk cache


def _load_dataset(config: dict, out_dir: Path, lang: str,
                  split: str) -> treebank.LabeledDataset:
    tb_path, st_path = _data_paths(config, lang, split)
    task = config.get("task", "POS")
    if task not in ("POS", "REL"):
        raise ConfigError(f"task must be POS or REL, got {task!r}")
    include_root = bool(config.get("include_root_relations", False))
    cache_dir = _cache_dir(out_dir)
    key = hashlib.sha256("|".join([
        str(tb_path.resolve()), str(st_path.resolve()), task,
        str(include_root), str(tb_path.stat().st_size),
        str(st_path.stat().st_size),
    ]).encode("utf-8")).hexdigest()
    cache_file = cache_dir / f"{key}.npz"
    if cache_file.exists():
        try:
            return _dataset_from_cache(cache_file, lang, task, split)
        except Exception:
            cache_file.unlink()
    try:
        sentences = treebank.parse_conllu(tb_path.read_text(encoding="utf-8"))
        store = read_store(st_path)
        if task == "POS":
            ds = treebank.build_pos_dataset(sentences, store, split=split)
        else:
            ds = treebank.build_rel_dataset(sentences, store, split=split,
                                            include_root=include_root)
    except (treebank.ConlluError, treebank.AlignmentError, StoreError) as exc:
        raise DataError(f"{lang}/{split}: {exc}") from exc
    cache_dir.mkdir(parents=True, exist_ok=True)
    np.savez(cache_file,
             features=ds.features, labels=ds.labels,
             sentence_index=ds.sentence_index,
             names=np.asarray(ds.vocab.names, dtype=object),
             counts=np.asarray(ds.vocab.counts, dtype=np.int64),
             sentence_ids=np.asarray(ds.sentence_ids, dtype=object))
    return ds


def _dataset_from_cache(cache_file: Path, lang: str, task: str,
                        split: str) -> treebank.LabeledDataset:
    with np.load(cache_file, allow_pickle=True) as z:
        vocab = treebank.ConceptVocab(tuple(z["names"].tolist()),
                                      tuple(int(c) for c in z["counts"]))
        return treebank.LabeledDataset(
            z["features"], z["labels"], vocab,
            treebank.Provenance(lang, task, split),
            z["sentence_index"], tuple(z["sentence_ids"].tolist()))


def _filtered_dataset(config, out_dir, lang, split):
    ds = _load_dataset(config, out_dir, lang, split)
    min_count = int(config.get("min_count", 20))
    filtered, _ = treebank.filter_rare_concepts(ds, min_count)
    if filtered.n_samples == 0:
        raise DataError(f"{lang}/{split}: no concepts survive the "
                        f"{min_count}-sample floor")
    return filtered


# ---------------------------------------------------------------------------
# output manifest


def _write_outputs(out_dir: Path, command: str, config: dict,
                   files: dict[str, bytes | str]) -> None:
    """Write produced files then update manifest.json (merged by command)."""
    written = []
    for rel, content in sorted(files.items()):
        path = out_dir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(content, bytes):
            path.write_bytes(content)
        else:
            path.write_text(content, encoding="utf-8")
        written.append(rel)
    manifest_file = out_dir / "manifest.json"
    manifest = {"commands": {}}
    if manifest_file.exists():
        try:
            manifest = json.loads(manifest_file.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            manifest = {"commands": {}}
    manifest.setdefault("commands", {})[command] = {
        "config_sha256": _config_hash(config),
        "files": sorted(written),
    }
    manifest_file.write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n",
        encoding="utf-8")


def _json_text(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _map_jobs(fn, keys, jobs: int) -> dict:
    """Run fn over keys, optionally in parallel; results keyed and sorted."""
    if jobs <= 1:
        return {k: fn(k) for k in keys}
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {k: pool.submit(fn, k) for k in keys}
        return {k: futures[k].result() for k in keys}


def _check_finite(name: str, *arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError(f"non-finite values produced by {name}")


# ---------------------------------------------------------------------------
# commands


def _probe_config(config: dict) -> probe.ProbeConfig:
    section = config.get("probe", {})
    _check_range("probe", section, {
        "m": (1, 100000), "lr": (1e-12, 1.0), "wd": (0.0, 1.0),
        "batch": (1, 1e9), "epochs": (1, 1e6), "seed": (0, 2**63),
    })
    return probe.ProbeConfig(
        m=int(section.get("m", 32)), lr=float(section.get("lr", 1e-4)),
        wd=float(section.get("wd", 1e-6)), batch=int(section.get("batch", 8)),
        epochs=int(section.get("epochs", 20)), seed=int(section.get("seed", 0)))


def _probe_path(out_dir: Path, lang: str) -> Path:
    return out_dir / "probes" / f"{lang}.probe"


def cmd_probe_train(config: dict, out_dir: Path, jobs: int) -> None:
    cfg = _probe_config(config)
    langs = _languages(config)

    def train_one(lang: str):
        train = _filtered_dataset(config, out_dir, lang, "train")
        dev = _load_dataset(config, out_dir, lang, "dev")
        lang_cfg = probe.ProbeConfig(cfg.m, cfg.lr, cfg.wd, cfg.batch,
                                     cfg.epochs,
                                     derive_seed(cfg.seed, hash_lang(lang)))
        transform, ps, history = probe.train_probe(train, dev, lang_cfg)
        _check_finite(f"probe-train[{lang}]", transform.weight)
        return ps, history

    results = _map_jobs(train_one, langs, jobs)
    files = {}
    metrics = {}
    (out_dir / "probes").mkdir(parents=True, exist_ok=True)
    for lang in langs:
        ps, history = results[lang]
        probe.save_probe(_probe_path(out_dir, lang), ps)
        best = max(history, key=lambda h: (h["dev_accuracy"], -h["epoch"]))
        metrics[lang] = {"best_epoch": best["epoch"],
                         "best_dev_accuracy": best["dev_accuracy"],
                         "history": history}
    files["probes/metrics.json"] = _json_text(metrics)
    _write_outputs(out_dir, "probe-train", config, files)


def hash_lang(lang: str) -> int:
    return int.from_bytes(hashlib.sha256(lang.encode()).digest()[:4], "little")


def cmd_probe_eval(config: dict, out_dir: Path, jobs: int) -> None:
    langs = _languages(config)

    def eval_one(lang: str):
        path = _probe_path(out_dir, lang)
        if not path.exists():
            raise DataError(f"no trained probe for {lang}; run probe-train first")
        ps = probe.load_probe(path)
        test = _load_dataset(config, out_dir, lang, "test")
        return probe.evaluate_accuracy(ps, test)

    results = _map_jobs(eval_one, langs, jobs)
    files = {"probe_eval/metrics.json": _json_text(
        {lang: results[lang] for lang in langs})}
    _write_outputs(out_dir, "probe-eval", config, files)


def cmd_align(config: dict, out_dir: Path, jobs: int) -> None:
    section = config.get("geometry", {})
    _check_range("geometry", section, {"n_trials": (1, 1e6), "seed": (0, 2**63)})
    n_trials = int(section.get("n_trials", 100))
    seed = int(section.get("seed", 0))
    langs = list(section.get("languages", _languages(config)))
    prototype_sets = {}
    datasets = {}
    for lang in langs:
        path = _probe_path(out_dir, lang)
        if not path.exists():
            raise DataError(f"no trained probe for {lang}; run probe-train first")
        prototype_sets[lang] = probe.load_probe(path)
        datasets[lang] = _filtered_dataset(config, out_dir, lang, "train")
    pairs = [(a, b) for i, a in enumerate(langs) for b in langs[i + 1:]]

    def align_pair(pair):
        a, b = pair
        return geometry.alignability_report(
            (a, b), prototype_sets[a], prototype_sets[b], datasets[b],
            n_trials=n_trials,
            seed=derive_seed(seed, hash_lang(a), hash_lang(b)))

    try:
        reports = _map_jobs(align_pair, pairs, jobs)
    except geometry.GeometryError as exc:
        raise DataError(str(exc)) from exc
    files = {}
    rsa_matrix = {a: {a: 1.0} for a in langs}
    ev_matrix = {a: {a: 1.0} for a in langs}
    for (a, b) in pairs:
        rep = reports[(a, b)]
        files[f"align/{a}__{b}.json"] = rep.to_json()
        rsa_matrix[a][b] = rsa_matrix.setdefault(b, {})[a] = rep.rsa_rho
        ev_matrix[a][b] = ev_matrix.setdefault(b, {})[a] = rep.procrustes_ev
    for name, matrix in (("rsa", rsa_matrix), ("procrustes", ev_matrix)):
        lines = ["," + ",".join(langs)]
        for a in langs:
            lines.append(a + "," + ",".join(repr(matrix[a][b]) for b in langs))
        files[f"align/{name}_matrix.csv"] = "\n".join(lines) + "\n"
    _write_outputs(out_dir, "align", config, files)


def _meta_config(config: dict) -> metalearn.MetaConfig:
    section = config.get("meta", {})
    _check_range("meta", section, {
        "h": (1, 1e6), "m": (1, 1e6), "epochs": (1, 1e6),
        "episodes_per_language_per_epoch": (1, 1e6), "n_query": (1, 1e9),
        "lr": (1e-12, 1.0), "wd": (0.0, 1.0), "dropout": (0.0, 0.999),
        "seed": (0, 2**63),
    })
    return metalearn.MetaConfig(
        h=int(section.get("h", 256)), m=int(section.get("m", 32)),
        epochs=int(section.get("epochs", 50)),
        episodes_per_language_per_epoch=int(
            section.get("episodes_per_language_per_epoch", 50)),
        n_query=int(section.get("n_query", 30)),
        lr=float(section.get("lr", 5e-5)), wd=float(section.get("wd", 1e-4)),
        dropout=float(section.get("dropout", 0.33)),
        seed=int(section.get("seed", 0)),
        n_support_choices=tuple(section.get("n_support_choices", (10, 30, 50))))


def _adapt_config(section: dict, seed: int = 0) -> metalearn.AdaptConfig:
    _check_range("meta.adapt", section, {
        "epochs": (1, 1e6), "lr": (1e-12, 1.0), "batch": (1, 1e9),
        "wd": (0.0, 1.0),
    })
    return metalearn.AdaptConfig(
        epochs=int(section.get("epochs", 100)),
        lr=float(section.get("lr", 5e-3)),
        batch=int(section.get("batch", 8)),
        wd=float(section.get("wd", 0.0)),
        seed=int(section.get("seed", seed)))


def _meta_model_path(out_dir: Path) -> Path:
    return out_dir / "meta" / "model.meta"


def cmd_meta_train(config: dict, out_dir: Path, jobs: int) -> None:
    del jobs  # episodic training is sequential by contract
    cfg = _meta_config(config)
    section = config.get("meta", {})
    mode = section.get("mode", "fewshot")
    if mode not in ("fewshot", "zeroshot"):
        raise ConfigError(f"meta.mode must be fewshot or zeroshot, got {mode!r}")
    source = config.get("source_language")
    if not source:
        raise ConfigError("source_language is required for meta-train")
    source_path = _probe_path(out_dir, source)
    if not source_path.exists():
        raise DataError(f"no trained probe for source {source}; "
                        "run probe-train first")
    source_ps = probe.load_probe(source_path)
    train_langs = section.get("train_languages")
    if not train_langs:
        raise ConfigError("meta.train_languages is required for meta-train")
    datasets = {lang: _filtered_dataset(config, out_dir, lang, "train")
                for lang in train_langs}
    try:
        if mode == "fewshot":
            model = metalearn.meta_train_fewshot(datasets, source_ps, cfg)
        else:
            model = metalearn.meta_train_zeroshot(datasets, source_ps, cfg)
    except (metalearn.MetaError, treebank.SamplingError) as exc:
        raise DataError(str(exc)) from exc
    _check_finite("meta-train", *model.f_phi.parameters().values())
    (out_dir / "meta").mkdir(parents=True, exist_ok=True)
    metalearn.save_meta_model(_meta_model_path(out_dir), model)
    info = {"mode": mode, "source_language": source,
            "train_languages": sorted(model.g_per_language) or sorted(train_langs),
            "n_concepts": len(source_ps.vocab)}
    _write_outputs(out_dir, "meta-train", config,
                   {"meta/train_info.json": _json_text(info)})


def cmd_meta_adapt(config: dict, out_dir: Path, jobs: int) -> None:
    del jobs
    section = config.get("meta", {})
    adapt_section = section.get("adapt", {})
    lang = adapt_section.get("language")
    if not lang:
        raise ConfigError("meta.adapt.language is required for meta-adapt")
    n_support = int(adapt_section.get("n_support", 50))
    if n_support < 1:
        raise ConfigError("meta.adapt.n_support must be positive")
    model_path = _meta_model_path(out_dir)
    if not model_path.exists():
        raise DataError("no meta model; run meta-train first")
    model = metalearn.load_meta_model(model_path)
    adapt_cfg = _adapt_config(adapt_section)
    split = "train" if _has_split(config, lang, "train") else "test"
    ds = _load_dataset(config, out_dir, lang, split)
    try:
        support, _ = treebank.holdout_split_for_testonly(
            ds, n_support, seed=adapt_cfg.seed)
        support = treebank.restrict_to_vocab(
            support, model.source_prototypes.vocab)
        g = metalearn.fewshot_adapt(model, support, adapt_cfg)
    except (metalearn.MetaError, treebank.SamplingError) as exc:
        raise DataError(str(exc)) from exc
    _check_finite("meta-adapt", g.weight, g.bias)
    (out_dir / "meta").mkdir(parents=True, exist_ok=True)
    from .tensorcore import save_params
    save_params(out_dir / "meta" / f"adapted_{lang}_n{n_support}.params",
                {"weight": g.weight, "bias": g.bias},
                meta={"kind": "adapted-map", "language": lang,
                      "n_support": n_support, "support_split": split})
    _write_outputs(out_dir, "meta-adapt", config, {
        f"meta/adapted_{lang}_n{n_support}.json": _json_text(
            {"language": lang, "n_support": n_support, "split": split})})


def cmd_meta_eval(config: dict, out_dir: Path, jobs: int) -> None:
    section = config.get("meta", {})
    eval_section = section.get("eval", {})
    n_values = [int(v) for v in eval_section.get("n_support", (0, 10, 50))]
    runs = int(eval_section.get("runs", 5))
    seed = int(eval_section.get("seed", 0))
    if runs < 1:
        raise ConfigError("meta.eval.runs must be positive")
    eval_langs = section.get("eval_languages")
    if not eval_langs:
        raise ConfigError("meta.eval_languages is required for meta-eval")
    model_path = _meta_model_path(out_dir)
    if not model_path.exists():
        raise DataError("no meta model; run meta-train first")
    model = metalearn.load_meta_model(model_path)
    adapt_cfg = _adapt_config(section.get("adapt", {}))

    def eval_one(lang: str):
        train_ds = (_load_dataset(config, out_dir, lang, "train")
                    if _has_split(config, lang, "train") else None)
        test_ds = _load_dataset(config, out_dir, lang, "test")
        try:
            return metalearn.evaluate_generalization(
                model, train_ds, test_ds, n_values, runs,
                seed=derive_seed(seed, hash_lang(lang)), adapt_cfg=adapt_cfg)
        except (metalearn.MetaError, treebank.SamplingError) as exc:
            raise DataError(f"{lang}: {exc}") from exc

    results = _map_jobs(eval_one, list(eval_langs), jobs)
    lines = ["language,n_support,run,accuracy"]
    for lang in sorted(eval_langs):
        per_n = results[lang]
        for n in sorted(per_n):
            for run, acc in enumerate(per_n[n]):
                lines.append(f"{lang},{n},{run},{acc!r}")
    _write_outputs(out_dir, "meta-eval", config,
                   {"meta/results.csv": "\n".join(lines) + "\n"})


def cmd_synth(config: dict, out_dir: Path, jobs: int) -> None:
    del jobs
    section = _require(config, "synth")
    _check_range("synth", section, {
        "n_concepts": (2, 10000), "n_dim": (2, 100000),
        "n_languages": (1, 10000), "angle_bound_deg": (0.0, 180.0),
        "cluster_spread": (1e-12, 1e6), "sentences_per_language": (1, 1e9),
        "tokens_per_sentence": (1, 1e6), "seed": (0, 2**63),
    })
    try:
        spec = synth.SyntheticSpec(
            n_concepts=int(section.get("n_concepts", 17)),
            n_dim=int(section.get("n_dim", 64)),
            n_languages=int(section.get("n_languages", 5)),
            rotation=section.get("rotation", "orthogonal-random"),
            angle_bound_deg=float(section.get("angle_bound_deg", 15.0)),
            cluster_spread=float(section.get("cluster_spread", 0.3)),
            sentences_per_language=int(
                section.get("sentences_per_language", 500)),
            tokens_per_sentence=int(section.get("tokens_per_sentence", 12)),
            dev_sentences=section.get("dev_sentences"),
            test_sentences=section.get("test_sentences"),
            seed=int(section.get("seed", 0)))
        spec.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    layout = synth.generate_corpus(spec, out_dir / "data")
    langs = sorted(layout)
    runconfig = {
        "task": "POS",
        "min_count": int(config.get("min_count", 20)),
        "languages": langs,
        "source_language": langs[0],
        "data": {
            "treebanks": {lang: {split: layout[lang][split]["treebank"]
                                 for split in layout[lang]}
                          for lang in langs},
            "stores": {lang: {split: layout[lang][split]["store"]
                              for split in layout[lang]}
                       for lang in langs},
        },
        "probe": config.get("probe", {"m": 32}),
        "geometry": config.get("geometry", {"n_trials": 100, "seed": 0}),
        "meta": config.get("meta", {}),
        "output_dir": str(out_dir),
    }
    produced = sorted(
        str(Path(info[kind]).relative_to(out_dir))
        for lang in langs for info in layout[lang].values()
        for kind in ("treebank", "store"))
    produced += [p + ".manifest.json" for p in produced if p.endswith(".pcfs")]
    files = {"runconfig.json": _json_text(runconfig)}
    _write_outputs(out_dir, "synth", config, files)
    # record generated data files in the manifest entry as well
    manifest_file = out_dir / "manifest.json"
    manifest = json.loads(manifest_file.read_text(encoding="utf-8"))
    entry = manifest["commands"]["synth"]
    entry["files"] = sorted(set(entry["files"]) | set(produced))
    manifest_file.write_text(json.dumps(manifest, sort_keys=True, indent=2)
                             + "\n", encoding="utf-8")


def cmd_report(config: dict, out_dir: Path, jobs: int) -> None:
    del jobs
    section = config.get("report", {})
    results_dir = Path(section.get("results_dir", out_dir / "meta"))
    results_file = results_dir / "results.csv"
    if not results_file.exists():
        raise DataError(f"no results.csv under {results_dir}")
    rows = results_file.read_text(encoding="utf-8").strip().split("\n")
    if len(rows) < 2:
        raise DataError(f"{results_file} holds no result rows")
    header = rows[0].split(",")
    if header != ["language", "n_support", "run", "accuracy"]:
        raise DataError(f"{results_file} has unexpected columns {header}")
    by_lang: dict[str, dict[int, list[float]]] = {}
    for row in rows[1:]:
        lang, n, _run, acc = row.split(",")
        by_lang.setdefault(lang, {}).setdefault(int(n), []).append(float(acc))
    langs = sorted(by_lang)
    n_values = sorted({n for per in by_lang.values() for n in per})
    # per-language mean accuracy over runs, as fractions
    grid = {lang: {n: float(np.mean(by_lang[lang][n]))
                   for n in by_lang[lang]} for lang in langs}
    md = ["| language | " + " | ".join(f"N={n}" for n in n_values) + " |",
          "|---" * (len(n_values) + 1) + "|"]
    for lang in langs:
        cells = [f"{100.0 * grid[lang][n]:.1f}" if n in grid[lang] else "-"
                 for n in n_values]
        md.append(f"| {lang} | " + " | ".join(cells) + " |")
    avg_row, std_row = [], []
    for n in n_values:
        values = [grid[lang][n] for lang in langs if n in grid[lang]]
        avg_row.append(f"{100.0 * float(np.mean(values)):.1f}")
        std_row.append(f"{float(np.std(values)):.3f}")
    md.append("| AVG | " + " | ".join(avg_row) + " |")
    md.append("| STD | " + " | ".join(std_row) + " |")
    csv_lines = ["language," + ",".join(str(n) for n in n_values)]
    for lang in langs:
        cells = [repr(grid[lang][n]) if n in grid[lang] else ""
                 for n in n_values]
        csv_lines.append(lang + "," + ",".join(cells))
    files = {"report/report.md": "\n".join(md) + "\n",
             "report/grid.csv": "\n".join(csv_lines) + "\n"}
    _write_outputs(out_dir, "report", config, files)


# ---------------------------------------------------------------------------
# entry point


COMMANDS = {
    "probe-train": cmd_probe_train,
    "probe-eval": cmd_probe_eval,
    "align": cmd_align,
    "meta-train": cmd_meta_train,
    "meta-adapt": cmd_meta_adapt,
    "meta-eval": cmd_meta_eval,
    "synth": cmd_synth,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="proto-align",
        description="Structural-concept prototype spaces: probing, "
                    "alignability, and meta-learned alignment.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run config")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel worker cap for independent sub-jobs")
    parser.add_argument("--seed", type=int, default=None,
                        help="override every seed in the config")
    parser.add_argument("--out", default=None,
                        help="output directory (overrides config output_dir)")
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        if args.seed is not None:
            for section in ("probe", "geometry", "meta", "synth"):
                config.setdefault(section, {})["seed"] = args.seed
            config.get("meta", {}).setdefault("eval", {})["seed"] = args.seed
        out_dir = Path(args.out or config.get("output_dir", "out"))
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        out_dir.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](config, out_dir, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
