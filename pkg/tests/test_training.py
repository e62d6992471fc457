import math

import numpy as np
import pytest

from carryover import tensor as T
from carryover.decoders import DecoderConfig, OrderingPolicy, PointerSteps
from carryover.errors import EmptyDataset
from carryover.metrics import corpus_eval
from carryover.model import EncoderConfig, binary_nll, carryover_loss
from carryover.synth import SynthConfig, synth_generate
from carryover.training import DEFAULT_EPOCHS, TrainConfig, TrainHistory, train

from conftest import toy_instance

SMALL = EncoderConfig(emb_dim=8, hidden=8)


def _small(kind, **kw):
    return TrainConfig(decoder=DecoderConfig(kind=kind, d_model=16, heads=2, d_k=8, d_v=8, pointer_hidden=16),
                       encoder=SMALL, **kw)


def test_binary_loss_values():
    assert binary_nll(T.Tensor([0.5]), [1]).item() == pytest.approx(math.log(2), abs=1e-12)
    assert binary_nll(T.Tensor([1.0, 0.0]), [1, 0]).item() <= 1e-11
    assert binary_nll(T.Tensor([0.9, 0.1]), [1, 0]).item() == pytest.approx(-2 * math.log(0.9), abs=1e-12)
    assert binary_nll(T.Tensor([0.9, 0.1]), [1, 0]).item() == pytest.approx(0.210721, abs=1e-6)


def test_pointer_loss_sums_steps():
    lp = T.log_softmax(T.Tensor([0.0, 0.0, 0.0]))
    loss = carryover_loss(PointerSteps([lp, lp], [0, 2]))
    assert loss.item() == pytest.approx(2 * math.log(3), abs=1e-12)


def test_loss_needs_labels_for_probabilities():
    with pytest.raises(ValueError):
        carryover_loss(T.Tensor([0.5]))


def test_empty_train_set():
    with pytest.raises(EmptyDataset):
        train(TrainConfig(epochs=1), [])


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr=0.0)
    with pytest.raises(ValueError):
        TrainConfig(bucket_preset="nope")
    assert TrainConfig(decoder=DecoderConfig(kind="transformer")).n_epochs == DEFAULT_EPOCHS["transformer"] == 200
    assert DEFAULT_EPOCHS["pointer"] == 40


def test_config_dict_round_trip():
    cfg = _small("pointer", seed=9, epochs=3, ordering=OrderingPolicy("none", 2))
    again = TrainConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()


@pytest.mark.parametrize("kind", ["independent", "pointer", "transformer"])
def test_one_instance_overfits(kind):
    inst = toy_instance()
    model, history = train(_small(kind, epochs=60, dropout=0.0, lr=0.01), [inst])
    assert corpus_eval(model, [inst]).f1 == 1.0
    carried = {j for j in inst.labels if inst.candidates[j].distance >= 1}
    assert {j for j in model.predict(inst).selected if inst.candidates[j].distance >= 1} == carried
    assert max(history.dev_f1) == 1.0


def test_one_epoch_runs_are_identical():
    data = synth_generate(SynthConfig(n_dialogues=20, seed=4))["train"]
    runs = [train(_small("transformer", epochs=1, seed=3), data) for _ in range(2)]
    assert runs[0][1].to_dict() == runs[1][1].to_dict()
    for (k, a), b in zip(runs[0][0].named_parameters().items(), runs[1][0].named_parameters().values()):
        assert np.array_equal(a.value.data, b.value.data), k


def test_best_epoch_restored():
    data = synth_generate(SynthConfig(n_dialogues=30, seed=6))
    model, h = train(_small("independent", epochs=4), data["train"], data["dev"])
    assert h.dev_f1[h.best_epoch] == max(h.dev_f1)
    assert corpus_eval(model, data["dev"]).f1 == pytest.approx(h.dev_f1[h.best_epoch])


def test_history_keeps_earliest_tie():
    h = TrainHistory()
    for f in (0.5, 0.7, 0.7, 0.6):
        h.record(1.0, f)
    assert h.best_epoch == 1


def test_frozen_embeddings_stay_fixed():
    inst = toy_instance()
    cfg = _small("independent", epochs=2, freeze_embeddings=True)
    from carryover.model import CarryoverModel, corpus_vocabulary

    ref = CarryoverModel.create(cfg.model_config(), corpus_vocabulary([inst]), np.random.default_rng([0, 0]))
    model, _ = train(cfg, [inst])
    assert np.array_equal(model.embeddings.matrix, ref.embeddings.matrix)
