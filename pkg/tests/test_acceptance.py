"""Acceptance criteria, one test per criterion, each timed against its budget.

Criterion 7 runs on the real movie-review polarity files when the
environment variables DISCAUG_MR_POS and DISCAUG_MR_NEG point at them, and
on the MR-sized synthetic planted-lexicon corpus otherwise.
"""

import os
import time
from fractions import Fraction

import numpy as np
import pytest

import oracles
from discaug.corpus import NEG, POS, Dataset, Sample, SplitSpec, load_pair, make_imbalanced, oversample, split
from discaug.models import NaiveBayes, TrainConfig, train
from discaug.neural.gradcheck import grad_check
from discaug.neural.layers import attention, bilstm_encode, conv_maxpool, lstm_cell, softmax
from discaug.neural.nets import AttnBiLSTM, pad_batch
from discaug.pipeline import OS, OUR_OS, ExperimentConfig, derive_seed, run_experiment, validate_filter
from discaug.segmenter import generate_candidates, harvest, split_discourse
from discaug.synthetic import CorpusSpec, generate, lexicon_label
from discaug.text import build_vocab, tokenize
from test_neural import as_lists, random_attention, random_lstm


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f}s, budget {self.seconds}s"


def test_c1_worked_example():
    with Budget(1):
        s = Sample(tuple(tokenize("The actress is beautiful, but the plot is terrible")), NEG, 0)
        got = [(" ".join(c.tokens), c.proposed_label) for c in generate_candidates(split_discourse(s))]
        assert got == [
            ("the plot is terrible , but the actress is beautiful", POS),
            ("the actress is beautiful", POS),
            ("the plot is terrible", NEG),
        ]


def test_c2_gradient_fidelity():
    with Budget(10):
        rng = np.random.default_rng(0)
        net = AttnBiLSTM.create(6, 3, 2, 2, rng, scale=0.5)
        net.params["embedding"] = rng.uniform(-1, 1, size=(6, 3))
        idx, mask = pad_batch([[1, 2, 3, 4], [5, 2, 4, 3]])
        labels = np.array([0, 1])
        clean = grad_check(net, idx, mask, labels)
        faulty = grad_check(net, idx, mask, labels, corrupt={"fwd.W_f": 2.0})
        print(f"grad_check clean={clean:.2e} faulty={faulty:.2e}")
        assert clean < 1e-4
        assert faulty > 1e-1


def test_c3_normalization():
    with Budget(5):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            T = rng.integers(1, 10)
            pad = rng.random(T) < 0.4
            pad[0] = False
            _, alpha = attention(rng.normal(size=(T, 4)) * 2, random_attention(rng, 4, 3), pad)
            assert abs(alpha.sum() - 1.0) <= 1e-6
            assert np.all(alpha >= 0) and np.all(alpha[pad] == 0.0)
            z = rng.normal(size=rng.integers(2, 6)) * 10
            y = softmax(z)
            assert abs(y.sum() - 1.0) <= 1e-9
            assert np.max(np.abs(softmax(z + rng.normal() * 100) - y)) <= 1e-9


def test_c4_oracle_equivalence():
    with Budget(10):
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(100):
            d, H, T = (int(v) for v in rng.integers(1, 5, size=3))
            fwd, bwd = random_lstm(rng, d, H), random_lstm(rng, d, H)
            x = rng.normal(size=(T, d))
            h, c = lstm_cell(x[0], x[0, :1].repeat(H), np.ones(H), fwd)
            h_ref, c_ref = oracles.lstm_step(x[0].tolist(), x[0, :1].repeat(H).tolist(), [1.0] * H, as_lists(fwd))
            worst = max(worst, np.max(np.abs(h - h_ref)), np.max(np.abs(c - c_ref)))
            enc = bilstm_encode(x, fwd, bwd)
            worst = max(worst, np.max(np.abs(enc - oracles.bilstm(x.tolist(), as_lists(fwd), as_lists(bwd)))))
            p = random_attention(rng, 2 * H, 2)
            ctx, alpha = attention(enc, p)
            ctx_ref, a_ref = oracles.attention(enc.tolist(), p.W_h.tolist(), p.W_v.tolist(), p.b.tolist(),
                                               p.v.tolist())
            worst = max(worst, np.max(np.abs(ctx - ctx_ref)), np.max(np.abs(alpha - a_ref)))
            filters = {w: (rng.normal(size=(3, w, d)), rng.normal(size=3)) for w in (1, 2, 3)}
            feats = conv_maxpool(x, filters)
            banks = [(w, filters[w][0].tolist(), filters[w][1].tolist()) for w in (1, 2, 3)]
            worst = max(worst, np.max(np.abs(feats - oracles.conv_maxpool(x.tolist(), banks))))
        assert worst <= 1e-10

        docs = [("good fun film".split(), POS), ("good cast".split(), POS), ("bad slow film".split(), NEG),
                ("bad dull cast plot".split(), NEG), ("fun plot".split(), POS)]
        d = Dataset(tuple(Sample(tuple(t), lab, i) for i, (t, lab) in enumerate(docs)))
        vocab = build_vocab(d)
        assert len(vocab) - 2 <= 10
        nb = NaiveBayes.fit(d, vocab, 1.0)
        for query in (["good"], ["bad", "film"], ["fun", "slow", "cast", "unknown"], ["plot", "plot", "dull"]):
            ref = oracles.naive_bayes_posterior(docs, query)
            got = nb.predict_proba([query])[0]
            assert np.max(np.abs(got - [float(r) for r in ref])) <= 1e-12
        assert nb.likelihood("good", POS) == pytest.approx(float(Fraction(3, 7 + 8)), abs=1e-12)


def test_c5_sampling_exactness():
    with Budget(1):
        samples = [Sample(("p", str(i)), POS, i) for i in range(5331)]
        samples += [Sample(("n", str(i)), NEG, 5331 + i) for i in range(5331)]
        train_set, _ = split(Dataset(tuple(samples)), SplitSpec(0.8, 0))
        n_pos = train_set.class_counts[POS]
        for ir in (5, 10, 20, 50, 100):
            imb = make_imbalanced(train_set, ir, seed=ir)
            assert imb.class_counts == {NEG: n_pos // ir, POS: n_pos}
            bal = oversample(imb, seed=ir)
            assert bal.class_counts[NEG] == bal.class_counts[POS] == n_pos


def _purity(cands, lexicon):
    return sum(lexicon_label(c.tokens, lexicon) == c.proposed_label for c in cands) / len(cands)


@pytest.mark.slow
def test_c6_validator_ablation():
    with Budget(300):
        spec = CorpusSpec(neutral_head_rate=0.3)
        gains = []
        for seed in range(3):
            data, lexicon = generate(spec, seed=seed, name="synthetic")
            train_set, _ = split(data, SplitSpec(0.8, derive_seed(seed, "split")))
            validator = train(train_set, TrainConfig.validator(epochs=5, seed=seed))
            imb = make_imbalanced(train_set, 5, derive_seed(seed, "imbalance"))
            cands = harvest(imb)
            kept = validate_filter(cands, validator)
            before, after = _purity(cands, lexicon), _purity(kept, lexicon)
            print(f"seed {seed}: {len(cands)} candidates purity {before:.3f}, {len(kept)} kept purity {after:.3f}")
            gains.append(after - before)
        mean_gain = float(np.mean(gains))
        print(f"mean purity gain {100 * mean_gain:.2f} pp")
        assert mean_gain >= 0.05


def _mr_source():
    pos, neg = os.environ.get("DISCAUG_MR_POS"), os.environ.get("DISCAUG_MR_NEG")
    if pos and neg:
        return load_pair(pos, neg, name="mr")
    data, _ = generate(CorpusSpec(), seed=0, name="mr-synthetic")
    return data


@pytest.mark.slow
def test_c7_directional_end_to_end():
    with Budget(900):
        cfg = ExperimentConfig(
            datasets=[_mr_source()], irs=(20,), methods=("nb", "lr"), settings=(OS, OUR_OS), seeds=3,
            global_seed=0, train_fraction=0.8, validator_config=TrainConfig.validator(dim=64, epochs=5),
        )
        table = run_experiment(cfg)
        print(table.pivot())
        assert not table.has_errors
        improvements = {m: imp for _, _, m, s, _, imp in table.aggregates() if s == OUR_OS}
        assert improvements["nb"] > 0
        assert improvements["lr"] > 0


def test_c8_determinism(tmp_path):
    data, _ = generate(CorpusSpec(n_pos=150, n_neg=150, lexicon_size=60), seed=3, name="syn")

    def run(path):
        cfg = ExperimentConfig(
            datasets=[data], irs=(2, 5), methods=("nb", "lr", "cnn", "rnn"), settings=(OS, OUR_OS, "wo-val"),
            seeds=2, global_seed=11,
            validator_config=TrainConfig.validator(dim=8, hidden=4, attn_dim=3, epochs=2),
            model_overrides={"all": dict(dim=8, epochs=2), "cnn": dict(n_filters=4),
                             "rnn": dict(hidden=4, attn_dim=3)},
        )
        run_experiment(cfg).write_csv(path)
        return path.read_bytes()

    with Budget(120):
        assert run(tmp_path / "a.csv") == run(tmp_path / "b.csv")
