import io

import numpy as np
import pytest

from embed_sidecar.backend import HashEncoder, UndecodableImageError, load_backend


def tiny_png(color=(200, 30, 30)) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.new("RGB", (4, 4), color).save(buf, format="PNG")
    return buf.getvalue()


@pytest.fixture(scope="module")
def enc():
    return HashEncoder()


class TestText:
    def test_shape_and_dtype(self, enc):
        vectors, truncated = enc.encode_text(["a dog", "a cat", ""])
        assert vectors.shape == (3, 512)
        assert vectors.dtype == np.float32
        assert truncated == [False, False, False]

    def test_bitwise_deterministic(self, enc):
        a, _ = enc.encode_text(["molten glass sculpture"])
        b, _ = HashEncoder().encode_text(["molten glass sculpture"])
        assert np.array_equal(a, b)

    def test_batch_rows_equal_single_calls_exactly(self, enc):
        # the HTTP contract only promises 1e-5; the hash backend is exact
        texts = ["one", "two words", "three little words", ""]
        batch, _ = enc.encode_text(texts)
        for i, t in enumerate(texts):
            single, _ = enc.encode_text([t])
            assert np.array_equal(batch[i], single[0])

    def test_truncation_flag_and_prefix_vector(self, enc):
        long = " ".join(f"w{i}" for i in range(100))
        cut = " ".join(f"w{i}" for i in range(enc.token_limit))
        vectors, truncated = enc.encode_text([long, cut])
        assert truncated == [True, False]
        # the oversized text is encoded from its first token_limit tokens
        assert np.array_equal(vectors[0], vectors[1])

    def test_token_order_matters(self, enc):
        a, _ = enc.encode_text(["dog park"])
        b, _ = enc.encode_text(["park dog"])
        assert not np.array_equal(a, b)


class TestImage:
    def test_deterministic_and_content_sensitive(self, enc):
        blob = tiny_png()
        a = enc.encode_image([blob, blob])
        assert np.array_equal(a[0], a[1])
        b = enc.encode_image([tiny_png(color=(0, 0, 255))])
        assert not np.array_equal(a[0], b[0])

    def test_undecodable_carries_index(self, enc):
        with pytest.raises(UndecodableImageError) as err:
            enc.encode_image([tiny_png(), b"not an image at all"])
        assert err.value.index == 1

    def test_empty_payload_rejected(self, enc):
        with pytest.raises(UndecodableImageError):
            enc.encode_image([b""])


class TestRegistry:
    def test_default_model(self):
        backend = load_backend()
        assert backend.dim == 512
        assert backend.model_id == "dev-hash/512"

    def test_unknown_model_lists_known(self):
        with pytest.raises(ValueError, match="dev-hash/512"):
            load_backend("clip-nonexistent/999")
