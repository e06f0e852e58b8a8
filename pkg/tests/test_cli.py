from __future__ import annotations

import numpy as np
import pytest

from stackparse.cli import main
from stackparse.config import RunConfig, load_config, parse_config_text
from stackparse.modelio import load_model, save_model
from stackparse.parser import parse as parse_model_fn
from stackparse.tagger import tag as tag_fn
from stackparse.treebank import parse_conllu, write_conllu
from util import make_sentence

TINY_CONFIG = """\
# desk-scale test settings
epochs = 8
hidden = 10
layers = 1
word_dim = 6
char_dim = 4
att_dim = 4
dropout = 0.0
parser_word_dim = 6
tag_dim = 4
parser_hidden = 10
parser_layers = 1
d_arc = 8
d_rel = 5
parser_dropout = 0.0
stack_hidden = 12
stack_layers = 1
"""


def treebank_text():
    sentences = [
        make_sentence(["the", "cat", "sat"], ["DET", "NOUN", "VERB"],
                      [2, 3, 0], ["det", "nsubj", "root"]),
        make_sentence(["a", "dog", "ran"], ["DET", "NOUN", "VERB"],
                      [2, 3, 0], ["det", "nsubj", "root"]),
        make_sentence(["the", "dog", "sat"], ["DET", "NOUN", "VERB"],
                      [2, 3, 0], ["det", "nsubj", "root"]),
    ]
    return write_conllu(sentences)


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "tb.conllu").write_text(treebank_text(), encoding="utf-8")
    (tmp_path / "cfg.txt").write_text(TINY_CONFIG, encoding="utf-8")
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


# -- configuration ------------------------------------------------------------------


def test_config_parse_and_round_trip(tmp_path):
    config = RunConfig.from_mapping({"epochs": "7", "decoder": "mst",
                                     "include_punct": "false"})
    assert config.epochs == 7 and config.decoder == "mst"
    assert config.include_punct is False
    path = tmp_path / "cfg.txt"
    path.write_text(config.to_text(), encoding="utf-8")
    assert load_config(str(path)) == config


def test_config_rejects_unknown_keys_and_bad_values():
    with pytest.raises(ValueError, match="unknown configuration key"):
        RunConfig.from_mapping({"hidden_size": "10"})
    with pytest.raises(ValueError):
        RunConfig.from_mapping({"dropout": "1.5"})
    with pytest.raises(ValueError):
        RunConfig.from_mapping({"decoder": "beam"})
    with pytest.raises(ValueError):
        RunConfig.from_mapping({"epochs": "zero"})


def test_config_text_comments_and_errors():
    mapping = parse_config_text("# comment\nseed = 4  # trailing\n\nk=12\n")
    assert mapping == {"seed": "4", "k": "12"}
    with pytest.raises(ValueError, match="line 1"):
        parse_config_text("not a key value line")


# -- validate ------------------------------------------------------------------------


def test_validate_clean_file_exits_zero(workdir, capsys):
    assert run("validate", "--input", workdir / "tb.conllu") == 0
    assert "0 errors" in capsys.readouterr().out


def test_validate_flags_cycle_nonzero(workdir, capsys):
    bad = "\n".join([
        "1\ta\t_\tNOUN\t_\t_\t2\tnsubj\t_\t_",
        "2\tb\t_\tNOUN\t_\t_\t1\tnsubj\t_\t_",
        "3\tc\t_\tVERB\t_\t_\t0\troot\t_\t_",
    ]) + "\n"
    (workdir / "bad.conllu").write_text(bad, encoding="utf-8")
    assert run("validate", "--input", workdir / "bad.conllu") == 1
    assert "cycle" in capsys.readouterr().out


def test_validate_against_ud_english_inventory(workdir, capsys):
    text = "1\tkiasu\t_\tBOGUS\t_\t_\t0\troot\t_\t_\n"
    (workdir / "odd.conllu").write_text(text, encoding="utf-8")
    # against the data-derived inventory the tag is (vacuously) known
    assert run("validate", "--input", workdir / "odd.conllu") == 0
    assert run("validate", "--input", workdir / "odd.conllu",
               "--inventory", "ud-english") == 1
    assert "unknown-pos" in capsys.readouterr().out


def test_validate_multi_root_warning_exits_zero(workdir, capsys):
    text = "\n".join([
        "1\ta\t_\tNOUN\t_\t_\t0\troot\t_\t_",
        "2\tb\t_\tVERB\t_\t_\t0\troot\t_\t_",
    ]) + "\n"
    (workdir / "multi.conllu").write_text(text, encoding="utf-8")
    assert run("validate", "--input", workdir / "multi.conllu") == 0
    assert "multi-root" in capsys.readouterr().out


def test_missing_file_is_a_diagnostic_not_a_crash(workdir, capsys):
    code = run("validate", "--input", workdir / "nope.conllu")
    assert code == 2
    assert "missing file" in capsys.readouterr().err


# -- train / tag / parse / eval ----------------------------------------------------------


def test_tagger_pipeline_and_snapshot(workdir, capsys):
    model_path = workdir / "tagger.model"
    assert run("train-tagger", "--train", workdir / "tb.conllu",
               "--dev", workdir / "tb.conllu", "--out", model_path,
               "--config", workdir / "cfg.txt", "--seed", 3) == 0
    snapshot = (workdir / "tagger.model.config").read_text()
    assert "seed = 3" in snapshot and "best_epoch" in snapshot
    assert run("tag", "--model", model_path, "--input", workdir / "tb.conllu",
               "--out", workdir / "tagged.conllu") == 0
    tagged = parse_conllu((workdir / "tagged.conllu").read_text())
    assert [s.upos for s in tagged] == [("DET", "NOUN", "VERB")] * 3


def test_parser_pipeline_eval_matches_training_dev_report(workdir, capsys):
    model_path = workdir / "parser.model"
    assert run("train-parser", "--train", workdir / "tb.conllu",
               "--dev", workdir / "tb.conllu", "--out", model_path,
               "--config", workdir / "cfg.txt") == 0
    out = capsys.readouterr().out
    assert "dev UAS 100.0" in out
    assert run("parse", "--model", model_path, "--input", workdir / "tb.conllu",
               "--out", workdir / "parsed.conllu") == 0
    assert run("eval", "--gold", workdir / "tb.conllu",
               "--pred", workdir / "parsed.conllu") == 0
    lines = capsys.readouterr().out
    assert "UAS      100.00" in lines and "LAS      100.00" in lines


def test_eval_gold_equals_pred_writes_tsv(workdir, capsys):
    out_path = workdir / "report.tsv"
    assert run("eval", "--gold", workdir / "tb.conllu",
               "--pred", workdir / "tb.conllu", "--out", out_path) == 0
    text = out_path.read_text()
    assert "uas\t100.00" in text and "las\t100.00" in text


def test_model_archive_round_trip_bit_exact(workdir, tmp_path):
    run("train-parser", "--train", workdir / "tb.conllu", "--out",
        workdir / "p.model", "--config", workdir / "cfg.txt")
    model = load_model(str(workdir / "p.model"))
    again = tmp_path / "copy.model"
    save_model(str(again), model)
    clone = load_model(str(again))
    for name, tensor in model.parameters().items():
        assert np.array_equal(tensor.data, clone.parameters()[name].data), name
    sentence = parse_conllu(treebank_text())[0]
    before = parse_model_fn(model, sentence)
    after = parse_model_fn(clone, sentence)
    assert before.heads == after.heads and before.deprels == after.deprels
    assert np.array_equal(before.arc_scores, after.arc_scores)


def test_tagger_archive_round_trip(workdir):
    run("train-tagger", "--train", workdir / "tb.conllu", "--out",
        workdir / "t.model", "--config", workdir / "cfg.txt")
    model = load_model(str(workdir / "t.model"))
    sentence = parse_conllu(treebank_text())[0]
    result = tag_fn(model, sentence)
    assert len(result.tags) == 3
    save_model(str(workdir / "t2.model"), model)
    clone = load_model(str(workdir / "t2.model"))
    again = tag_fn(clone, sentence)
    assert result.tags == again.tags
    assert np.array_equal(result.emissions, again.emissions)


def test_stacked_training_commands(workdir, capsys):
    run("train-tagger", "--train", workdir / "tb.conllu", "--out",
        workdir / "base_t.model", "--config", workdir / "cfg.txt")
    assert run("train-stacked-tagger", "--base-model", workdir / "base_t.model",
               "--train", workdir / "tb.conllu", "--dev", workdir / "tb.conllu",
               "--out", workdir / "st.model", "--config", workdir / "cfg.txt") == 0
    stacked = load_model(str(workdir / "st.model"))
    sentence = parse_conllu(treebank_text())[0]
    assert stacked.tag(sentence).tags == ("DET", "NOUN", "VERB")
    # the tag command accepts stacked archives too
    assert run("tag", "--model", workdir / "st.model",
               "--input", workdir / "tb.conllu",
               "--out", workdir / "st_tagged.conllu") == 0
    tagged = parse_conllu((workdir / "st_tagged.conllu").read_text())
    assert tagged[0].upos == ("DET", "NOUN", "VERB")

    run("train-parser", "--train", workdir / "tb.conllu", "--out",
        workdir / "base_p.model", "--config", workdir / "cfg.txt")
    assert run("train-stacked-parser", "--base-model", workdir / "base_p.model",
               "--train", workdir / "tb.conllu", "--dev", workdir / "tb.conllu",
               "--out", workdir / "sp.model", "--config", workdir / "cfg.txt") == 0
    sp = load_model(str(workdir / "sp.model"))
    result = parse_model_fn(sp, sentence)
    assert result.heads == (2, 3, 0)
    # stacked archives survive a save/load cycle bit-exactly
    save_model(str(workdir / "sp2.model"), sp)
    sp2 = load_model(str(workdir / "sp2.model"))
    second = parse_model_fn(sp2, sentence)
    assert result.heads == second.heads and result.deprels == second.deprels


def test_wrong_model_type_is_rejected(workdir, capsys):
    run("train-tagger", "--train", workdir / "tb.conllu", "--out",
        workdir / "t.model", "--config", workdir / "cfg.txt")
    code = run("parse", "--model", workdir / "t.model",
               "--input", workdir / "tb.conllu", "--out", workdir / "x.conllu")
    assert code == 2
    assert "not a parser archive" in capsys.readouterr().err


# -- corpus selection commands ---------------------------------------------------------------


def test_lm_train_rank_and_lexicon_match(workdir, capsys):
    corpus = workdir / "corpus.txt"
    corpus.write_text("the cat sat here today\n" * 30 +
                      "a dog ran home quickly\n" * 30, encoding="utf-8")
    candidates = workdir / "cands.txt"
    candidates.write_text("\n".join([
        "the cat sat here today",
        "makan kiasu wah lao zzz",
        "too short",
        " ".join(["x"] * 60),
    ]) + "\n", encoding="utf-8")
    lexicon = workdir / "lex.txt"
    lexicon.write_text("kiasu\nwah lao\n", encoding="utf-8")

    assert run("lm-train", "--corpus", corpus, "--order", 3,
               "--out", workdir / "lm.json") == 0
    assert run("lm-rank", "--lm", workdir / "lm.json", "--input", candidates,
               "--lexicon", lexicon, "--min-len", 5, "--max-len", 50,
               "--out", workdir / "ranked.tsv") == 0
    ranked = (workdir / "ranked.tsv").read_text().strip().split("\n")
    assert len(ranked) == 2  # length filter removed two candidates
    first = ranked[0].split("\t")
    assert first[5] == "makan kiasu wah lao zzz"  # most divergent first
    assert "kiasu" in first[4] and "wah lao" in first[4]

    assert run("lexicon-match", "--input", candidates, "--lexicon", lexicon,
               "--out", workdir / "hits.tsv") == 0
    hits = (workdir / "hits.tsv").read_text().strip().split("\n")
    assert hits[1].startswith("kiasu,wah lao\t")


def test_iaa_command(workdir, capsys):
    assert run("iaa", "--a", workdir / "tb.conllu", "--b", workdir / "tb.conllu") == 0
    out = capsys.readouterr().out
    assert "TagAcc   100.00" in out


def test_jackknife_command(workdir, capsys):
    assert run("jackknife", "--train", workdir / "tb.conllu", "--k", 3,
               "--out", workdir / "jack.conllu", "--config", workdir / "cfg.txt") == 0
    tagged = parse_conllu((workdir / "jack.conllu").read_text())
    assert len(tagged) == 3
    assert all(len(s.upos) == 3 for s in tagged)


def test_crossfold_command(workdir, capsys):
    (workdir / "bigger.conllu").write_text(treebank_text() * 2, encoding="utf-8")
    assert run("crossfold", "--treebank", workdir / "bigger.conllu", "--folds", 2,
               "--config", workdir / "cfg.txt", "--out", workdir / "folds.tsv") == 0
    out = capsys.readouterr().out
    assert "mean" in out
    assert (workdir / "folds.tsv").read_text().startswith("fold\tuas\tlas")


def test_deterministic_pipeline_same_seed(workdir):
    for name in ("r1", "r2"):
        run("train-parser", "--train", workdir / "tb.conllu", "--out",
            workdir / f"{name}.model", "--config", workdir / "cfg.txt", "--seed", 9)
        run("parse", "--model", workdir / f"{name}.model",
            "--input", workdir / "tb.conllu", "--out", workdir / f"{name}.conllu")
    assert (workdir / "r1.conllu").read_text() == (workdir / "r2.conllu").read_text()


def test_effective_config_snapshot_reproduces_the_run(workdir):
    run("train-parser", "--train", workdir / "tb.conllu", "--out",
        workdir / "orig.model", "--config", workdir / "cfg.txt", "--seed", 6)
    # the snapshot must parse as-is and rebuild the identical model
    snapshot = workdir / "orig.model.config"
    assert "# command = train-parser" in snapshot.read_text()
    run("train-parser", "--train", workdir / "tb.conllu", "--out",
        workdir / "again.model", "--config", snapshot)
    a = load_model(str(workdir / "orig.model"))
    b = load_model(str(workdir / "again.model"))
    for name, tensor in a.parameters().items():
        assert np.array_equal(tensor.data, b.parameters()[name].data), name
