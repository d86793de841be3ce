import io

import numpy as np
import pytest

from tashkeel.analysis import (
    NoEmbeddingLayerError,
    best_lines,
    class_census,
    export_embeddings,
    rank_lines,
    ranked_aggregate,
    worst_lines,
    write_embeddings_tsv,
    write_ranking_csv,
)
from tashkeel.codec import DiacriticClass, LabeledText, build_vocabulary, strip_diacritics
from tashkeel.corpus import Corpus, toy_corpus
from tashkeel.metrics import EvalOptions, score_corpus
from tashkeel.models import build_ffnn, build_rnn, ffnn_basic_config, ffnn_embed_config, rnn_config

from helpers import perturb_labels, random_labeled_text

D = DiacriticClass


class TestClassCensus:
    def test_hand_counted_line(self):
        census = class_census(Corpus(["كَلَّمَ"]))
        counts = census.totals
        assert counts[int(D.FATHA)] == 2
        assert counts[int(D.SHADDA_FATHA)] == 1
        assert counts.sum() == 3

    def test_empty_corpus(self):
        census = class_census(Corpus([]))
        assert census.totals.sum() == 0
        assert census.percentages.sum() == 0.0

    def test_percentages_sum_to_hundred(self):
        census = class_census({"train": toy_corpus("train"), "heldout": toy_corpus("heldout")})
        assert census.percentages.sum() == pytest.approx(100.0, abs=0.01)

    def test_totals_match_metric_denominators(self):
        corpus = toy_corpus("train")
        census = class_census(corpus)
        lines = corpus.decode()
        report = score_corpus(lines, lines, EvalOptions(True, True))
        assert census.totals.sum() == report.counted_chars

    def test_csv_shape(self):
        census = class_census({"train": Corpus(["كَلَّمَ"])})
        buf = io.StringIO()
        census.write_csv(buf)
        rows = buf.getvalue().strip().split("\n")
        assert len(rows) == 16
        assert rows[0].startswith("class,train,total,pct")


class TestRankLines:
    def _three_hand_scored(self):
        gold = [
            strip_diacritics("كَلَّمَ أَحْمَدٌ"),  # perfect prediction: DER 0
            strip_diacritics("كَلَّمَ أَحْمَدٌ"),  # one error in 7: DER 1/7
            strip_diacritics("كَلْمُ"),             # one error in 3: DER 1/3
        ]
        pred = [gold[0],
                LabeledText(gold[1].base, gold[1].labels[:-1] + (D.DAMMA,)),
                LabeledText(gold[2].base, (D.FATHA, D.FATHA, gold[2].labels[2]))]
        return gold, pred

    def test_exact_order(self):
        gold, pred = self._three_hand_scored()
        ranked = rank_lines(gold, pred)
        ders = [e.report.der for e in ranked]
        assert ders == sorted(ders)
        assert ranked[0].index == 0
        assert ranked[-1].index == 2

    def test_perfect_predictions_keep_original_order(self):
        rng = np.random.default_rng(1)
        gold = [random_labeled_text(rng, max_len=15) for _ in range(6)]
        ranked = rank_lines(gold, gold)
        assert [e.index for e in ranked] == list(range(6))

    def test_single_error_ranks_last(self):
        rng = np.random.default_rng(2)
        gold = [random_labeled_text(rng, max_len=15, min_len=5) for _ in range(5)]
        pred = list(gold)
        victim = None
        for i, lt in enumerate(gold):
            bad = perturb_labels(rng, lt, rate=0.9)
            if bad != lt:
                victim = i
                pred[i] = bad
                break
        assert victim is not None
        ranked = rank_lines(gold, pred)
        assert ranked[-1].index == victim

    def test_aggregate_matches_metrics(self):
        rng = np.random.default_rng(3)
        gold = [random_labeled_text(rng, max_len=20) for _ in range(10)]
        pred = [perturb_labels(rng, g) for g in gold]
        ranked = rank_lines(gold, pred)
        assert ranked_aggregate(ranked) == score_corpus(gold, pred)

    def test_best_and_worst_extraction(self):
        gold, pred = self._three_hand_scored()
        ranked = rank_lines(gold, pred)
        assert [e.index for e in best_lines(ranked, 1)] == [0]
        assert [e.index for e in worst_lines(ranked, 1)] == [2]

    def test_csv_written(self):
        gold, pred = self._three_hand_scored()
        buf = io.StringIO()
        write_ranking_csv(rank_lines(gold, pred), buf)
        assert len(buf.getvalue().strip().split("\n")) == 4


class TestExportEmbeddings:
    def test_shape_and_order(self):
        vocab = build_vocabulary(["كلم به"], with_sentence_marks=True)
        model = build_rnn(rnn_config(rnn_hidden=3, dense_sizes=(4,), embedding_dim=5), vocab)
        rows = export_embeddings(model)
        assert len(rows) == len(vocab)
        assert all(vec.shape == (5,) for _, vec in rows)
        tokens = [token for token, _ in rows]
        assert tokens[: len(vocab.chars)] == list(vocab.chars)
        assert tokens[len(vocab.chars):] == ["<PAD>", "<UNK>", "<SOS>", "<EOS>"]

    def test_untrained_model_exports_initialization(self):
        vocab = build_vocabulary(["كلم"], with_sentence_marks=True)
        config = rnn_config(rnn_hidden=3, dense_sizes=(4,), embedding_dim=4)
        a = build_rnn(config, vocab, seed=42)
        b = build_rnn(config, vocab, seed=42)
        for (_, va), (_, vb) in zip(export_embeddings(a), export_embeddings(b)):
            assert np.array_equal(va, vb)

    def test_ffnn_basic_has_no_embedding(self):
        vocab = build_vocabulary(["كلم"])
        model = build_ffnn(ffnn_basic_config(), vocab)
        with pytest.raises(NoEmbeddingLayerError):
            export_embeddings(model)

    def test_ffnn_embed_exports(self):
        vocab = build_vocabulary(["كلم"])
        model = build_ffnn(
            ffnn_embed_config(embedding_rows=len(vocab), embedding_dim=6), vocab
        )
        rows = export_embeddings(model)
        assert len(rows) == len(vocab)

    def test_tsv_format(self):
        vocab = build_vocabulary(["كلم"], with_sentence_marks=True)
        model = build_rnn(rnn_config(rnn_hidden=3, dense_sizes=(4,), embedding_dim=4), vocab)
        buf = io.StringIO()
        write_embeddings_tsv(export_embeddings(model), buf)
        lines = buf.getvalue().strip().split("\n")
        assert len(lines) == len(vocab)
        assert all(len(l.split("\t")) == 5 for l in lines)
