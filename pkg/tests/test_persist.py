import numpy as np
import pytest

from tnad import (
    DataError,
    LegendreFeatureMap,
    MpsModel,
    TtnModel,
    fit_rescaler,
    load_model,
    save_model,
    score_samples,
)


def fitted_encoder(n_functions, n_features, seed=0):
    rng = np.random.default_rng(seed)
    data = rng.normal(3.0, 2.0, size=(50, n_features))
    return LegendreFeatureMap(n_functions, fit_rescaler(data)), data


class TestRoundTrip:
    def test_mps_roundtrip(self, tmp_path):
        encoder, data = fitted_encoder(3, 5)
        model = MpsModel.random(5, 3, init_bond=4, seed=1, encoder=encoder)
        path = tmp_path / "model.tnad"
        save_model(path, model)
        loaded = load_model(path)
        assert isinstance(loaded, MpsModel)
        assert loaded.phys_dim == 3
        for a, b in zip(loaded.cores, model.cores):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_allclose(
            score_samples(loaded, loaded.encoder.encode_batch(data)),
            score_samples(model, encoder.encode_batch(data)),
            rtol=1e-12, atol=1e-12,
        )

    def test_mps_cores_bitwise_after_canonical_convention(self, tmp_path):
        encoder, _ = fitted_encoder(2, 4)
        model = MpsModel.random(4, 2, init_bond=3, seed=2, encoder=encoder)
        model.canonicalize(2)  # move off the storage convention
        path = tmp_path / "model.tnad"
        save_model(path, model)
        loaded = load_model(path)
        reference = model.copy()
        reference.canonicalize(0)
        for a, b in zip(loaded.cores, reference.cores):
            np.testing.assert_array_equal(a, b)
        assert loaded.center == 0

    def test_ttn_roundtrip_with_padding(self, tmp_path):
        encoder, data = fitted_encoder(2, 7, seed=3)
        model = TtnModel.random(7, 2, init_bond=3, seed=3, encoder=encoder)
        path = tmp_path / "tree.tnad"
        save_model(path, model)
        loaded = load_model(path)
        assert isinstance(loaded, TtnModel)
        assert loaded.padding == 1
        assert loaded.parents == model.parents
        assert loaded.children == model.children
        np.testing.assert_allclose(
            score_samples(loaded, loaded.encoder.encode_batch(data)),
            score_samples(model, encoder.encode_batch(data)),
            rtol=1e-12,
        )

    def test_rescaler_restored_exactly(self, tmp_path):
        encoder, _ = fitted_encoder(3, 4, seed=4)
        model = MpsModel.random(4, 3, init_bond=2, seed=4, encoder=encoder)
        path = tmp_path / "model.tnad"
        save_model(path, model)
        loaded = load_model(path)
        np.testing.assert_array_equal(loaded.encoder.rescaler.minimum, encoder.rescaler.minimum)
        np.testing.assert_array_equal(loaded.encoder.rescaler.maximum, encoder.rescaler.maximum)


class TestFileIntegrity:
    def write_model(self, tmp_path):
        encoder, _ = fitted_encoder(2, 4, seed=5)
        model = MpsModel.random(4, 2, init_bond=2, seed=5, encoder=encoder)
        path = tmp_path / "model.tnad"
        save_model(path, model)
        return path

    def test_magic_header(self, tmp_path):
        path = self.write_model(tmp_path)
        assert path.read_bytes()[:4] == b"TNAD"

    def test_bad_magic_rejected(self, tmp_path):
        path = self.write_model(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"NOPE"
        path.write_bytes(bytes(blob))
        with pytest.raises(DataError, match="magic"):
            load_model(path)

    def test_corruption_detected(self, tmp_path):
        path = self.write_model(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[len(blob) // 2] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(DataError, match="checksum"):
            load_model(path)

    def test_truncated_file_rejected(self, tmp_path):
        path = self.write_model(tmp_path)
        path.write_bytes(path.read_bytes()[:10])
        with pytest.raises(DataError):
            load_model(path)

    def test_unfitted_model_not_serializable(self, tmp_path):
        model = MpsModel.random(3, 2, seed=0)
        with pytest.raises(DataError, match="feature map"):
            save_model(tmp_path / "x.tnad", model)
