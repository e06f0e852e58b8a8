"""Model archives: one zip per model holding the parameter manifest and
blob, vocabulary manifests (token per line, index = line number), and a
`meta.txt` of `key = value` hyperparameters.  Stacked archives embed both
parameter sets with `base/` and `target/` name prefixes.  Writes are
atomic (temp file + rename); round trips are bit-exact.
"""

from __future__ import annotations

import os
import tempfile
import zipfile

import numpy as np

from . import numcore as nc
from .embeddings import PretrainedEmbeddings
from .parser import ParserModel
from .stacking import StackedParser, StackedTagger
from .tagger import TaggerModel


def _write_atomic(path: str, write_fn) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, temp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    os.close(fd)
    try:
        write_fn(temp_path)
        os.replace(temp_path, path)
    except BaseException:
        if os.path.exists(temp_path):
            os.unlink(temp_path)
        raise


def write_text_atomic(path: str, text: str) -> None:
    def writer(temp_path):
        with open(temp_path, "w", encoding="utf-8") as f:
            f.write(text)
    _write_atomic(path, writer)


def _meta_text(items: dict[str, object]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in items.items())


def _parse_meta(text: str) -> dict[str, str]:
    meta = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        meta[key.strip()] = value.strip()
    return meta


def _vocab_text(vocab: dict[str, int]) -> str:
    ordered = sorted(vocab.items(), key=lambda kv: kv[1])
    return "".join(f"{token}\n" for token, _ in ordered)


def _list_text(items) -> str:
    return "".join(f"{item}\n" for item in items)


def _read_lines(archive: zipfile.ZipFile, name: str) -> list[str]:
    with archive.open(name) as f:
        text = f.read().decode("utf-8")
    return text.split("\n")[:-1]  # keep forms that contain spaces intact


def _read_vocab(archive: zipfile.ZipFile, name: str) -> dict[str, int]:
    return {token: i for i, token in enumerate(_read_lines(archive, name))}


def _collect_params(model, prefix: str = "") -> dict[str, np.ndarray]:
    params = {f"{prefix}{k}": t.data for k, t in model.parameters().items()}
    for k, arr in model.constants().items():
        params[f"{prefix}const/{k}"] = arr
    return params


def _tagger_meta(model: TaggerModel) -> dict[str, object]:
    return {
        "word_dim": model.word_dim, "char_dim": model.char_dim,
        "att_dim": model.att_dim, "hidden": model.hidden,
        "layers": model.layers, "window": model.window,
        "dropout": model.dropout, "extra_input_dim": model.extra_input_dim,
        "pretrained_dim": model.pretrained.dim,
        "best_epoch": model.best_epoch if model.best_epoch is not None else "",
    }


def _parser_meta(model: ParserModel) -> dict[str, object]:
    return {
        "word_dim": model.word_dim, "tag_dim": model.tag_dim,
        "hidden": model.hidden, "layers": model.layers,
        "d_arc": model.d_arc, "d_rel": model.d_rel,
        "dropout": model.dropout, "pretrained_dim": model.pretrained.dim,
        "best_epoch": model.best_epoch if model.best_epoch is not None else "",
    }


def _restore_params(model, stored: dict[str, np.ndarray], prefix: str = "") -> None:
    for name, tensor in model.parameters().items():
        arr = stored[f"{prefix}{name}"]
        if arr.shape != tensor.data.shape:
            raise ValueError(f"stored parameter {prefix}{name} has shape "
                             f"{arr.shape}, expected {tensor.data.shape}")
        tensor.data = arr.astype(tensor.data.dtype, copy=True)


def _pretrained_from(stored: dict[str, np.ndarray], vocab: dict[str, int],
                     prefix: str = "") -> PretrainedEmbeddings:
    table = stored.get(f"{prefix}const/pretrained_table")
    if table is None or table.size == 0:
        return PretrainedEmbeddings.empty()
    return PretrainedEmbeddings(vocab, table)


def _build_tagger(meta: dict[str, str], tags, word_vocab, char_vocab,
                  pretrained) -> TaggerModel:
    model = TaggerModel(
        tags, word_vocab, char_vocab, pretrained=pretrained,
        word_dim=int(meta["word_dim"]), char_dim=int(meta["char_dim"]),
        att_dim=int(meta["att_dim"]), hidden=int(meta["hidden"]),
        layers=int(meta["layers"]), window=int(meta["window"]),
        dropout=float(meta["dropout"]),
        extra_input_dim=int(meta["extra_input_dim"]), rng=None,
    )
    if meta.get("best_epoch"):
        model.best_epoch = int(meta["best_epoch"])
    return model


def _build_parser(meta: dict[str, str], rels, tags, word_vocab,
                  pretrained) -> ParserModel:
    model = ParserModel(
        rels, tags, word_vocab, pretrained=pretrained,
        word_dim=int(meta["word_dim"]), tag_dim=int(meta["tag_dim"]),
        hidden=int(meta["hidden"]), layers=int(meta["layers"]),
        d_arc=int(meta["d_arc"]), d_rel=int(meta["d_rel"]),
        dropout=float(meta["dropout"]), rng=None,
    )
    if meta.get("best_epoch"):
        model.best_epoch = int(meta["best_epoch"])
    return model


def save_model(path: str, model) -> None:
    members: dict[str, str] = {}
    if isinstance(model, TaggerModel):
        meta = {"type": "tagger", **_tagger_meta(model)}
        members["tags.txt"] = _list_text(model.tags)
        members["words.txt"] = _vocab_text(model.word_vocab)
        members["chars.txt"] = _vocab_text(model.char_vocab)
        members["pretrained_vocab.txt"] = _vocab_text(model.pretrained.vocab)
        params = _collect_params(model)
    elif isinstance(model, ParserModel):
        meta = {"type": "parser", **_parser_meta(model)}
        members["rels.txt"] = _list_text(model.rels)
        members["tags.txt"] = _list_text(model.tags)
        members["words.txt"] = _vocab_text(model.word_vocab)
        members["pretrained_vocab.txt"] = _vocab_text(model.pretrained.vocab)
        params = _collect_params(model)
    elif isinstance(model, StackedTagger):
        meta = {"type": "stacked-tagger",
                "train_base_embeddings": model.train_base_embeddings}
        meta.update({f"base.{k}": v for k, v in _tagger_meta(model.base).items()})
        meta.update({f"target.{k}": v for k, v in _tagger_meta(model.target).items()})
        members["base/tags.txt"] = _list_text(model.base.tags)
        members["base/words.txt"] = _vocab_text(model.base.word_vocab)
        members["base/chars.txt"] = _vocab_text(model.base.char_vocab)
        members["base/pretrained_vocab.txt"] = _vocab_text(model.base.pretrained.vocab)
        members["target/tags.txt"] = _list_text(model.target.tags)
        members["target/words.txt"] = _vocab_text(model.target.word_vocab)
        members["target/chars.txt"] = _vocab_text(model.target.char_vocab)
        members["target/pretrained_vocab.txt"] = _vocab_text(model.target.pretrained.vocab)
        params = _collect_params(model.base, "base/")
        params.update(_collect_params(model.target, "target/"))
    elif isinstance(model, StackedParser):
        meta = {"type": "stacked-parser",
                "train_base_embeddings": model.train_base_embeddings,
                "word_dim": model.word_dim, "tag_dim": model.tag_dim,
                "hidden": model.hidden, "layers": model.layers,
                "dropout": model.dropout, "pretrained_dim": model.pretrained.dim,
                "best_epoch": model.best_epoch if model.best_epoch is not None else ""}
        meta.update({f"base.{k}": v for k, v in _parser_meta(model.base).items()})
        members["base/rels.txt"] = _list_text(model.base.rels)
        members["base/tags.txt"] = _list_text(model.base.tags)
        members["base/words.txt"] = _vocab_text(model.base.word_vocab)
        members["base/pretrained_vocab.txt"] = _vocab_text(model.base.pretrained.vocab)
        members["target/rels.txt"] = _list_text(model.rels)
        members["target/tags.txt"] = _list_text(model.tags)
        members["target/words.txt"] = _vocab_text(model.word_vocab)
        members["target/pretrained_vocab.txt"] = _vocab_text(model.pretrained.vocab)
        params = _collect_params(model.base, "base/")
        params.update({f"target/{k}": t.data
                       for k, t in model.target_parameters().items()})
        params["target/const/pretrained_table"] = model.pretrained.matrix
    else:
        raise TypeError(f"cannot save model of type {type(model).__name__}")

    manifest, blob = nc.params_to_manifest_blob(params)

    def writer(temp_path):
        with zipfile.ZipFile(temp_path, "w", zipfile.ZIP_DEFLATED) as archive:
            archive.writestr("meta.txt", _meta_text(meta))
            for name, text in members.items():
                archive.writestr(name, text)
            archive.writestr("manifest.txt", manifest)
            archive.writestr("params.bin", blob)

    _write_atomic(path, writer)


def load_model(path: str):
    with zipfile.ZipFile(path) as archive:
        meta = _parse_meta(archive.read("meta.txt").decode("utf-8"))
        manifest = archive.read("manifest.txt").decode("utf-8")
        blob = archive.read("params.bin")
        stored = nc.manifest_blob_to_params(manifest, blob)
        kind = meta["type"]
        if kind == "tagger":
            model = _build_tagger(
                meta, _read_lines(archive, "tags.txt"),
                _read_vocab(archive, "words.txt"),
                _read_vocab(archive, "chars.txt"),
                _pretrained_from(stored, _read_vocab(archive, "pretrained_vocab.txt")))
            _restore_params(model, stored)
            return model
        if kind == "parser":
            model = _build_parser(
                meta, _read_lines(archive, "rels.txt"),
                _read_lines(archive, "tags.txt"),
                _read_vocab(archive, "words.txt"),
                _pretrained_from(stored, _read_vocab(archive, "pretrained_vocab.txt")))
            _restore_params(model, stored)
            return model
        if kind == "stacked-tagger":
            base_meta = {k[5:]: v for k, v in meta.items() if k.startswith("base.")}
            target_meta = {k[7:]: v for k, v in meta.items() if k.startswith("target.")}
            base = _build_tagger(
                base_meta, _read_lines(archive, "base/tags.txt"),
                _read_vocab(archive, "base/words.txt"),
                _read_vocab(archive, "base/chars.txt"),
                _pretrained_from(stored, _read_vocab(archive, "base/pretrained_vocab.txt"),
                                 "base/"))
            _restore_params(base, stored, "base/")
            target = _build_tagger(
                target_meta, _read_lines(archive, "target/tags.txt"),
                _read_vocab(archive, "target/words.txt"),
                _read_vocab(archive, "target/chars.txt"),
                _pretrained_from(stored, _read_vocab(archive, "target/pretrained_vocab.txt"),
                                 "target/"))
            _restore_params(target, stored, "target/")
            return StackedTagger(base, target,
                                 meta["train_base_embeddings"] == "True")
        if kind == "stacked-parser":
            base_meta = {k[5:]: v for k, v in meta.items() if k.startswith("base.")}
            base = _build_parser(
                base_meta, _read_lines(archive, "base/rels.txt"),
                _read_lines(archive, "base/tags.txt"),
                _read_vocab(archive, "base/words.txt"),
                _pretrained_from(stored, _read_vocab(archive, "base/pretrained_vocab.txt"),
                                 "base/"))
            _restore_params(base, stored, "base/")
            stacked = StackedParser(
                base, _read_lines(archive, "target/rels.txt"),
                _read_lines(archive, "target/tags.txt"),
                _read_vocab(archive, "target/words.txt"),
                pretrained=_pretrained_from(stored,
                                            _read_vocab(archive, "target/pretrained_vocab.txt"),
                                            "target/"),
                word_dim=int(meta["word_dim"]), tag_dim=int(meta["tag_dim"]),
                hidden=int(meta["hidden"]), layers=int(meta["layers"]),
                dropout=float(meta["dropout"]),
                train_base_embeddings=meta["train_base_embeddings"] == "True",
                rng=None)
            for name, tensor in stacked.target_parameters().items():
                arr = stored[f"target/{name}"]
                tensor.data = arr.astype(tensor.data.dtype, copy=True)
            if meta.get("best_epoch"):
                stacked.best_epoch = int(meta["best_epoch"])
            return stacked
        raise ValueError(f"unknown model type {kind!r} in {path}")
