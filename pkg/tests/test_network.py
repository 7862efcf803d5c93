import numpy as np
import pytest

from burncnn.checkpoint import make_checkpoint
from burncnn.errors import ContractViolation, IncompatibleCheckpoint
from burncnn.network import (LayerParams, NetworkSpec, ParameterSet,
                             apply_freeze_policy, backward, build_alexnet,
                             build_reduced_alexnet, check_params, forward,
                             init_params, parse_freeze_policy, transfer_surgery)
from burncnn.ops import softmax_cross_entropy
from burncnn.tensor import Tensor


def small_batch(spec, n=2, seed=0, dtype=np.float32):
    rng = np.random.default_rng(seed)
    return Tensor(rng.standard_normal((n,) + spec.input_size).astype(dtype))


@pytest.fixture(scope="module")
def pretrained_1000():
    spec, params = build_alexnet(1000, seed=4)
    return make_checkpoint(spec, params)


class TestBuild:
    def test_canonical_parameter_count_near_60m(self, pretrained_1000):
        assert 6.0e7 <= pretrained_1000.params.count() <= 6.3e7

    @pytest.mark.parametrize("classes", [2, 3])
    def test_head_shape(self, classes):
        spec, params = build_alexnet(classes)
        assert params["fc8"].weights.shape == (4096, classes)
        assert spec.num_classes == classes

    def test_rejects_single_class(self):
        with pytest.raises(ContractViolation):
            build_alexnet(1)

    def test_shape_chain_flows_to_classes(self):
        spec, _ = build_alexnet(3)
        chain = spec.shape_chain()
        assert chain[0] == (3, 227, 227)
        assert chain[-1] == (3,)
        # the classic AlexNet feature map sizes
        assert (96, 55, 55) in chain
        assert (256, 6, 6) in chain

    def test_reduced_spec_same_structure(self):
        full, _ = build_alexnet(3)
        reduced, _ = build_reduced_alexnet(3)
        assert [l.kind for l in full.layers] == [l.kind for l in reduced.layers]
        assert reduced.param_layers()[0].conv.output_channels == 6

    def test_build_is_deterministic(self):
        _, p1 = build_reduced_alexnet(3, seed=11)
        _, p2 = build_reduced_alexnet(3, seed=11)
        for (n1, a), (n2, b) in zip(p1.items(), p2.items()):
            assert n1 == n2
            assert np.array_equal(a.weights.data, b.weights.data)

    def test_bad_chain_rejected(self):
        from burncnn.network import LayerSpec
        from burncnn.ops import ConvParams
        layers = (LayerSpec("conv", "c1", conv=ConvParams(3, 3, 1, 0, 4, 8)),
                  LayerSpec("linear", "fc", in_features=10, out_features=2))
        with pytest.raises(ContractViolation):
            NetworkSpec((3, 8, 8), layers, 2)


class TestForward:
    def test_zero_batch_zero_params_logits_equal_bias(self):
        spec, params = build_reduced_alexnet(3)
        zeroed = ParameterSet({
            name: LayerParams(Tensor.zeros(lp.weights.shape),
                              Tensor.zeros(lp.bias.shape))
            for name, lp in params.items()})
        head_bias = Tensor([0.5, -1.0, 2.0])
        zeroed["fc8"] = LayerParams(Tensor.zeros((128, 3)), head_bias)
        batch = Tensor.zeros((2, 3, 227, 227))
        logits, _ = forward(spec, zeroed, batch)
        assert np.allclose(logits.data, np.tile(head_bias.data, (2, 1)))

    def test_infer_twice_bit_identical(self):
        spec, params = build_reduced_alexnet(3)
        batch = small_batch(spec)
        a, _ = forward(spec, params, batch, mode="infer")
        b, _ = forward(spec, params, batch, mode="infer")
        assert np.array_equal(a.data, b.data)

    def test_train_equals_infer_when_dropout_disabled(self):
        from dataclasses import replace
        spec, params = build_reduced_alexnet(3)
        no_drop = NetworkSpec(
            spec.input_size,
            tuple(replace(l, rate=0.0) if l.kind == "dropout" else l
                  for l in spec.layers),
            spec.num_classes)
        batch = small_batch(spec)
        t, _ = forward(no_drop, params, batch, mode="train", rng=3)
        i, _ = forward(no_drop, params, batch, mode="infer")
        assert np.array_equal(t.data, i.data)

    def test_train_differs_from_infer_via_dropout(self):
        spec, params = build_reduced_alexnet(3)
        batch = small_batch(spec)
        t, _ = forward(spec, params, batch, mode="train", rng=3)
        i, _ = forward(spec, params, batch, mode="infer")
        assert not np.array_equal(t.data, i.data)

    def test_wrong_input_size_rejected(self):
        spec, params = build_reduced_alexnet(3)
        with pytest.raises(ContractViolation, match="input size"):
            forward(spec, params, Tensor.zeros((1, 3, 100, 100)))


class TestBackward:
    def test_zero_grad_logits_gives_zero_grads(self):
        spec, params = build_reduced_alexnet(3)
        batch = small_batch(spec)
        logits, cache = forward(spec, params, batch)
        grads = backward(spec, params, cache, Tensor.zeros(logits.shape))
        for _, g in grads.items():
            assert not g.weights.data.any()
            assert not g.bias.data.any()

    def test_frozen_layer_gets_zero_flagged_grads(self):
        spec, params = build_reduced_alexnet(3)
        frozen_spec = apply_freeze_policy(spec, "first-2")
        batch = small_batch(spec)
        logits, cache = forward(frozen_spec, params, batch)
        _, _, g = softmax_cross_entropy(logits, [0, 1])
        grads = backward(frozen_spec, params, cache, g)
        assert grads["conv1"].frozen and grads["conv2"].frozen
        assert not grads["conv1"].weights.data.any()
        assert not grads["conv3"].frozen
        assert grads["conv3"].weights.data.any()

    def test_mismatched_cache_rejected(self):
        spec, params = build_reduced_alexnet(3)
        other_spec, other_params = build_reduced_alexnet(3, seed=5)
        batch = small_batch(spec)
        logits, cache = forward(spec, params, batch)
        with pytest.raises(ContractViolation, match="cache"):
            backward(other_spec, other_params, cache, Tensor.zeros(logits.shape))

    def test_bad_grad_shape_rejected(self):
        spec, params = build_reduced_alexnet(3)
        batch = small_batch(spec)
        _, cache = forward(spec, params, batch)
        with pytest.raises(ContractViolation, match="grad_logits"):
            backward(spec, params, cache, Tensor.zeros((2, 7)))


class TestFreezePolicy:
    def test_parse(self):
        assert parse_freeze_policy("none") == ("none", 0)
        assert parse_freeze_policy("all-but-head") == ("all-but-head", 0)
        assert parse_freeze_policy("first-3") == ("first-k", 3)
        with pytest.raises(ContractViolation):
            parse_freeze_policy("first-x")
        with pytest.raises(ContractViolation):
            parse_freeze_policy("everything")

    def test_all_but_head(self):
        spec, _ = build_alexnet(2)
        frozen = apply_freeze_policy(spec, "all-but-head")
        flags = {l.name: l.trainable for l in frozen.param_layers()}
        assert flags == {"conv1": False, "conv2": False, "conv3": False,
                         "conv4": False, "conv5": False, "fc6": False,
                         "fc7": False, "fc8": True}


class TestTransferSurgery:
    def test_body_copied_bitwise(self, pretrained_1000):
        chk = pretrained_1000
        spec, params = transfer_surgery(chk, 2)
        for name, lp in chk.params.items():
            if name == "fc8":
                continue
            assert np.array_equal(params[name].weights.data, lp.weights.data)
            assert np.array_equal(params[name].bias.data, lp.bias.data)
        assert params["fc8"].weights.shape == (4096, 2)
        assert spec.num_classes == 2

    def test_head_reinitialized_even_at_same_width(self):
        spec, params = build_alexnet(2, seed=4)
        chk = make_checkpoint(spec, params)
        _, params = transfer_surgery(chk, 2)
        assert not np.array_equal(params["fc8"].weights.data,
                                  chk.params["fc8"].weights.data)
        assert not params["fc8"].bias.data.any()

    def test_head_init_scale(self, pretrained_1000):
        _, params = transfer_surgery(pretrained_1000, 3, seed=1)
        std = params["fc8"].weights.data.std()
        assert 0.008 < std < 0.012

    def test_freeze_policy_applied(self, pretrained_1000):
        spec, params = transfer_surgery(pretrained_1000, 2,
                                        freeze_policy="all-but-head")
        batch = small_batch(spec)
        logits, cache = forward(spec, params, batch)
        _, _, g = softmax_cross_entropy(logits, [0, 1])
        grads = backward(spec, params, cache, g)
        nonzero = [n for n, lg in grads.items() if lg.weights.data.any()]
        assert nonzero == ["fc8"]

    def test_structural_mismatch_names_layer(self, pretrained_1000):
        from dataclasses import replace
        chk = make_checkpoint(pretrained_1000.spec, pretrained_1000.params)
        broken_layers = list(chk.spec.layers)
        broken_layers[3] = replace(broken_layers[3], window=2)  # pool window
        chk.spec = NetworkSpec(chk.spec.input_size, tuple(broken_layers),
                               chk.spec.num_classes)
        with pytest.raises(IncompatibleCheckpoint, match="layer 3"):
            transfer_surgery(chk, 2)

    def test_non_reduced_required(self):
        spec, params = build_reduced_alexnet(3)
        chk = make_checkpoint(spec, params)
        with pytest.raises(IncompatibleCheckpoint):
            transfer_surgery(chk, 2)


class TestCheckParams:
    def test_missing_entry(self):
        spec, params = build_reduced_alexnet(3)
        incomplete = ParameterSet({n: lp for n, lp in params.items()
                                   if n != "fc7"})
        with pytest.raises(ContractViolation, match="fc7"):
            check_params(spec, incomplete)

    def test_wrong_shape(self):
        spec, params = build_reduced_alexnet(3)
        bad = params.copy()
        bad["fc8"] = LayerParams(Tensor.zeros((10, 3)), Tensor.zeros((3,)))
        with pytest.raises(ContractViolation, match="fc8"):
            check_params(spec, bad)

    def test_init_params_standalone(self):
        spec, _ = build_reduced_alexnet(3)
        params = init_params(spec, seed=9)
        check_params(spec, params)
