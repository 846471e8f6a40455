from __future__ import annotations

from attralign import synth
from attralign.data import load_table


def test_generator_emits_declared_row_count(corpus_csv):
    raw = load_table(corpus_csv)
    assert raw.n_rows == 10_000
    assert raw.names == synth.HEADER


def test_generator_deterministic(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    synth.write_corpus(a, n_rows=200, seed=5)
    synth.write_corpus(b, n_rows=200, seed=5)
    assert a.read_bytes() == b.read_bytes()


def test_generator_seed_changes_output(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    synth.write_corpus(a, n_rows=200, seed=5)
    synth.write_corpus(b, n_rows=200, seed=6)
    assert a.read_bytes() != b.read_bytes()


def test_both_outcomes_present(corpus_csv):
    raw = load_table(corpus_csv)
    outcomes = set(raw.columns["loan_status"])
    assert outcomes == {"Charged Off", "Fully Paid"}
