"""End-to-end runs of every subcommand through main(argv)."""

import numpy as np
import pytest

from ecochash.cli import SEED_ENV, main
from ecochash.evaluation import CURVE_HEADER, make_gaussian_classes
from ecochash.storage import write_features


@pytest.fixture
def run(capsys):
    def _run(argv, expect=0):
        code = main([str(a) for a in argv])
        captured = capsys.readouterr()
        assert code == expect, captured.err
        return captured.out, captured.err
    return _run


@pytest.fixture
def dataset(tmp_path):
    """Separable two-class CSVs: train/db/query plus an id base per split."""
    X, labels = make_gaussian_classes(2, 6, 400, separation=4.0, seed=5)
    paths = {}
    for name, sl in (("train", slice(0, 250)), ("db", slice(250, 350)),
                     ("query", slice(350, 400))):
        p = tmp_path / f"{name}.csv"
        ids = list(range(sl.start, sl.stop))
        write_features(p, ids, [labels[i] for i in ids], X[sl])
        paths[name] = p
    return paths


def train_flags(dataset, model_path, **over):
    flags = {"--k": 16, "--rho": 4, "--seed": 7}
    flags.update(over)
    argv = ["train", "--features", dataset["train"], "--model-out", model_path]
    for k, v in flags.items():
        argv += [k, v]
    return argv


def test_codebook_stats_shape_and_determinism(run):
    out1, _ = run(["codebook-stats", "--k", 16, "--capacity", 200, "--seed", 3])
    out2, _ = run(["codebook-stats", "--k", 16, "--capacity", 200, "--seed", 3])
    assert out1 == out2
    header, row = out1.strip().splitlines()
    assert header == ("k,capacity,rho,min_distance,mean_distance,"
                      "unique_bipartition_probability")
    k, capacity, rho, min_d, mean_d, prob = row.split(",")
    assert (k, capacity, rho) == ("16", "200", "16")
    assert int(min_d) >= 1
    assert 0.0 < float(mean_d) < 16.0
    assert 0.0 <= float(prob) <= 1.0


def test_codebook_stats_default_rho(run):
    out, _ = run(["codebook-stats", "--k", 32, "--capacity", 100, "--seed", 0])
    row = out.strip().splitlines()[1].split(",")
    assert row[2] == "20"
    assert float(row[5]) >= 0.99


def test_train_is_deterministic(run, dataset, tmp_path):
    m1, m2 = tmp_path / "a.model", tmp_path / "b.model"
    out1, _ = run(train_flags(dataset, m1))
    out2, _ = run(train_flags(dataset, m2))
    assert m1.read_bytes() == m2.read_bytes()
    assert out1.splitlines()[1].rsplit(",", 1)[0] == \
        out2.splitlines()[1].rsplit(",", 1)[0]  # all but wall time


def test_train_loss_improves(run, dataset, tmp_path):
    out, _ = run(train_flags(dataset, tmp_path / "m.model"))
    header, row = out.strip().splitlines()
    cols = dict(zip(header.split(","), row.split(",")))
    assert cols["examples"] == "250"
    assert cols["labels_seen"] == "2"
    assert cols["width"] == "16"
    assert float(cols["last_decile_loss"]) < float(cols["first_decile_loss"])


def test_train_seed_env_fallback(run, dataset, tmp_path, monkeypatch):
    explicit = tmp_path / "a.model"
    run(train_flags(dataset, explicit))
    monkeypatch.setenv(SEED_ENV, "7")
    fallback = tmp_path / "b.model"
    argv = train_flags(dataset, fallback)
    i = argv.index("--seed")
    del argv[i:i + 2]
    run(argv)
    assert explicit.read_bytes() == fallback.read_bytes()


def test_train_rejects_bad_seed_env(run, dataset, tmp_path, monkeypatch):
    monkeypatch.setenv(SEED_ENV, "notanumber")
    argv = train_flags(dataset, tmp_path / "m.model")
    i = argv.index("--seed")
    del argv[i:i + 2]
    _, err = run(argv, expect=1)
    assert err.startswith("error (invalid-argument):")


def test_train_skips_unlabeled_rows(run, tmp_path):
    X, labels = make_gaussian_classes(2, 4, 60, seed=1)
    labels = [None if i % 3 == 0 else labels[i] for i in range(60)]
    p = tmp_path / "f.csv"
    write_features(p, list(range(60)), labels, X)
    out, err = run(["train", "--features", p, "--k", 8, "--rho", 3,
                    "--seed", 0, "--model-out", tmp_path / "m.model"])
    assert "skipping 20 unlabeled rows" in err
    assert out.splitlines()[1].split(",")[0] == "40"


def test_train_requires_labeled_rows(run, tmp_path):
    X = np.zeros((5, 3), dtype=np.float32)
    p = tmp_path / "f.csv"
    write_features(p, list(range(5)), [None] * 5, X)
    _, err = run(["train", "--features", p, "--k", 8,
                  "--model-out", tmp_path / "m.model"], expect=1)
    assert err.startswith("error (invalid-argument):")


def test_train_shuffle_seed_changes_stream(run, dataset, tmp_path):
    plain = tmp_path / "a.model"
    shuffled = tmp_path / "b.model"
    run(train_flags(dataset, plain))
    run(train_flags(dataset, shuffled, **{"--shuffle-seed": 3}))
    assert plain.read_bytes() != shuffled.read_bytes()


def test_train_csv_and_binary_produce_same_model(run, tmp_path):
    X, labels = make_gaussian_classes(2, 5, 80, seed=9)
    int_labels = [y.removeprefix("c") for y in labels]
    csv_p, bin_p = tmp_path / "f.csv", tmp_path / "f.feat"
    write_features(csv_p, list(range(80)), int_labels, X)
    write_features(bin_p, list(range(80)), int_labels, X)
    m_csv, m_bin = tmp_path / "csv.model", tmp_path / "bin.model"
    run(["train", "--features", csv_p, "--k", 8, "--rho", 3, "--seed", 1,
         "--model-out", m_csv])
    run(["train", "--features", bin_p, "--k", 8, "--rho", 3, "--seed", 1,
         "--model-out", m_bin])
    assert m_csv.read_bytes() == m_bin.read_bytes()


@pytest.fixture
def trained(run, dataset, tmp_path):
    model = tmp_path / "m.model"
    run(train_flags(dataset, model))
    return model


def test_index_codeword_counts(run, dataset, trained, tmp_path):
    out, _ = run(["index", "--model", trained, "--features", dataset["db"],
                  "--mode", "codeword", "--index-out", tmp_path / "i.index"])
    header, row = out.strip().splitlines()
    assert header == "entries,codeword_entries,phi_entries,width"
    assert row == "100,100,0,16"


def test_index_phi_counts(run, dataset, trained, tmp_path):
    out, _ = run(["index", "--model", trained, "--features", dataset["db"],
                  "--mode", "phi", "--index-out", tmp_path / "i.index"])
    assert out.strip().splitlines()[1] == "100,0,100,16"


def test_index_codeword_unlabeled_row_errors(run, trained, tmp_path):
    X = np.zeros((3, 6), dtype=np.float32)
    p = tmp_path / "f.csv"
    write_features(p, [1, 2, 3], ["c0", None, "c1"], X)
    _, err = run(["index", "--model", trained, "--features", p,
                  "--mode", "codeword", "--index-out", tmp_path / "i.index"],
                 expect=1)
    assert err.startswith("error (invalid-argument):")
    assert "--skip-unlabeled" in err


def test_index_skip_unlabeled(run, trained, tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((3, 6)).astype(np.float32)
    p = tmp_path / "f.csv"
    write_features(p, [1, 2, 3], ["c0", None, "c1"], X)
    out, err = run(["index", "--model", trained, "--features", p,
                    "--mode", "codeword", "--index-out", tmp_path / "i.index",
                    "--skip-unlabeled"])
    assert "skipped 1 unlabeled rows" in err
    assert out.strip().splitlines()[1] == "2,2,0,16"


def test_index_unknown_label_category(run, trained, tmp_path):
    X = np.zeros((1, 6), dtype=np.float32)
    p = tmp_path / "f.csv"
    write_features(p, [1], ["never-seen"], X)
    _, err = run(["index", "--model", trained, "--features", p,
                  "--mode", "codeword", "--index-out", tmp_path / "i.index"],
                 expect=1)
    assert err.startswith("error (unknown-label):")


@pytest.fixture
def indexed(run, dataset, trained, tmp_path):
    index = tmp_path / "i.index"
    run(["index", "--model", trained, "--features", dataset["db"],
         "--mode", "codeword", "--index-out", index])
    return index


def test_query_output_shape(run, dataset, trained, indexed):
    out, _ = run(["query", "--model", trained, "--index", indexed,
                  "--queries", dataset["query"], "--top", 5])
    lines = out.strip().splitlines()
    assert lines[0] == "query_id,rank,id,distance"
    assert len(lines) == 1 + 50 * 5
    first = lines[1].split(",")
    assert first[0] == "350" and first[1] == "1"
    ranks = [int(l.split(",")[1]) for l in lines[1:6]]
    assert ranks == [1, 2, 3, 4, 5]
    dists = [int(l.split(",")[3]) for l in lines[1:6]]
    assert dists == sorted(dists)


def test_query_deterministic(run, dataset, trained, indexed):
    argv = ["query", "--model", trained, "--index", indexed,
            "--queries", dataset["query"]]
    out1, _ = run(argv)
    out2, _ = run(argv)
    assert out1 == out2


def test_eval_trained_model_is_accurate(run, dataset, trained, indexed):
    out, _ = run(["eval", "--model", trained, "--index", indexed,
                  "--queries", dataset["query"]])
    header, row = out.strip().splitlines()
    assert header == "queries,evaluated,skipped,map"
    n, evaluated, skipped, ap = row.split(",")
    assert (n, evaluated, skipped) == ("50", "50", "0")
    assert float(ap) >= 0.95


def test_eval_untrained_model_near_chance(run, dataset, tmp_path):
    model = tmp_path / "flat.model"
    index = tmp_path / "flat.index"
    run(train_flags(dataset, model, **{"--eta": 0.0}))
    run(["index", "--model", model, "--features", dataset["db"],
         "--mode", "codeword", "--index-out", index])
    out, _ = run(["eval", "--model", model, "--index", index,
                  "--queries", dataset["query"]])
    ap = float(out.strip().splitlines()[1].split(",")[3])
    # 2 balanced classes: a blind ranking sits near 1/L = 0.5
    assert 0.35 <= ap <= 0.65


def test_eval_rejects_unlabeled_queries(run, dataset, trained, indexed, tmp_path):
    X = np.zeros((4, 6), dtype=np.float32)
    p = tmp_path / "q.csv"
    write_features(p, [1, 2, 3, 4], [None] * 4, X)
    _, err = run(["eval", "--model", trained, "--index", indexed,
                  "--queries", p], expect=1)
    assert err.startswith("error (invalid-argument):")


def test_eval_full_experiment(run, dataset, tmp_path):
    curve = tmp_path / "curve.csv"
    out, _ = run(["eval", "--full-experiment",
                  "--train-features", dataset["train"],
                  "--db-features", dataset["db"],
                  "--queries", dataset["query"],
                  "--k", 8, "--rho", 4, "--orderings", 2,
                  "--seed", 11, "--curve-out", curve])
    lines = out.strip().splitlines()
    assert lines[0] == "ordering,map,bit_updates,flipped_bits"
    assert len(lines) == 4
    assert lines[1].startswith("0,") and lines[2].startswith("1,")
    assert lines[3].startswith("mean,")
    # codeword mode never rewrites stored bits
    assert lines[1].split(",")[2] == "0"
    curve_lines = curve.read_text().splitlines()
    assert curve_lines[0] == CURVE_HEADER
    assert len(curve_lines) == 3


def test_eval_full_experiment_needs_data_flags(run, dataset):
    _, err = run(["eval", "--full-experiment",
                  "--train-features", dataset["train"]], expect=1)
    assert err.startswith("error (invalid-argument):")
    assert "--db-features" in err


def test_missing_file_is_io_error(run, tmp_path):
    _, err = run(["train", "--features", tmp_path / "absent.csv",
                  "--k", 8, "--model-out", tmp_path / "m.model"], expect=1)
    assert err.startswith("error (io):")


def test_corrupt_model_is_format_error(run, dataset, tmp_path):
    bogus = tmp_path / "bogus.model"
    bogus.write_bytes(b"garbage bytes, not a model")
    _, err = run(["index", "--model", bogus, "--features", dataset["db"],
                  "--mode", "codeword", "--index-out", tmp_path / "i.index"],
                 expect=1)
    assert err.startswith("error (format):")


def test_negative_seed_rejected(run, dataset, tmp_path):
    _, err = run(train_flags(dataset, tmp_path / "m.model", **{"--seed": -4}),
                 expect=1)
    assert err.startswith("error (invalid-argument):")


def test_codebook_exhaustion_category_and_hint(run, tmp_path):
    X, labels = make_gaussian_classes(10, 4, 40, seed=2)
    p = tmp_path / "f.csv"
    write_features(p, list(range(40)), labels, X)
    # k=4 caps the pool at 8 codes but the stream brings 10 labels
    _, err = run(["train", "--features", p, "--k", 4, "--rho", 8,
                  "--capacity", 8, "--seed", 0,
                  "--model-out", tmp_path / "m.model"], expect=1)
    assert err.startswith("error (codebook-exhausted):")
    assert "regenerate" in err
