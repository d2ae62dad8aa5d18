import numpy as np
import pytest

from loradex import (
    ChecksumError,
    DataError,
    DimensionMismatchError,
    DuplicateKeyError,
    FormatError,
    GenerationRecord,
    build_index,
    ingest_records,
    load_corpus,
    load_index,
    load_prompt_set,
    open_sidecar,
    read_records,
    save_index,
    save_prompt_set,
    write_records,
    write_sidecar,
)
from loradex.store import PromptRole, utc_now_iso

from conftest import make_image_records, make_prompt_set


def vec(*xs):
    return np.asarray(xs, dtype=np.float32)


class TestIngest:
    def test_manifest_counts(self, rng):
        records = make_image_records(rng, ["a1"], ["p1"], [0, 1, 2], dim=4)
        corpus = ingest_records(records, 4)
        m = corpus.manifest
        assert (m.adapters, m.prompts, m.seeds) == (1, 1, 3)
        assert m.records == 6 and m.base_records == 3

    def test_identical_duplicate_dropped_and_counted(self):
        rec = GenerationRecord("image", "a", "p", 0, vec(1, 2))
        dup = GenerationRecord("image", "a", "p", 0, vec(1, 2))
        base = GenerationRecord("image", None, "p", 0, vec(0, 0))
        corpus = ingest_records([rec, dup, base], 2)
        assert corpus.manifest.records == 2
        assert corpus.manifest.duplicates_dropped == 1

    def test_conflicting_duplicate_rejected(self):
        a = GenerationRecord("image", "a", "p", 0, vec(1, 2))
        b = GenerationRecord("image", "a", "p", 0, vec(1, 3))
        with pytest.raises(DuplicateKeyError):
            ingest_records([a, b], 2)

    def test_dimension_mismatch_names_record(self):
        bad = GenerationRecord("image", "a", "p", 0, vec(1, 2, 3))
        with pytest.raises(DimensionMismatchError, match="'p'"):
            ingest_records([bad], 2)

    def test_non_finite_rejected(self):
        bad = GenerationRecord("image", "a", "p", 0, np.array([1.0, np.inf], dtype=np.float32))
        with pytest.raises(DataError):
            ingest_records([bad], 2)

    def test_text_record_constraints(self):
        ok = GenerationRecord("text", None, "some text", None, vec(1, 2))
        corpus = ingest_records([ok], 2)
        assert corpus.text_vector("some text") is not None
        with pytest.raises(DataError):
            ingest_records([GenerationRecord("text", "a", "t", None, vec(1, 2))], 2)
        with pytest.raises(DataError):
            ingest_records([GenerationRecord("text", None, "t", 3, vec(1, 2))], 2)

    def test_negative_seed_rejected(self):
        with pytest.raises(DataError):
            ingest_records([GenerationRecord("image", "a", "p", -1, vec(1, 2))], 2)


class TestRecordFiles:
    def test_round_trip_is_bit_exact(self, rng, tmp_path):
        records = make_image_records(rng, ["a1", "a2"], ["p1", "p2"], [0, 1], dim=4)
        records.append(GenerationRecord("text", None, "a caption", None, vec(1, 2, 3, 4)))
        corpus = ingest_records(records, 4)
        path = tmp_path / "c.jsonl"
        write_records(corpus.iter_records(), path)
        first = path.read_bytes()
        reloaded = load_corpus(path)
        assert list(reloaded.iter_records()) == list(corpus.iter_records())
        write_records(reloaded.iter_records(), path)
        assert path.read_bytes() == first

    def test_canonical_output_independent_of_input_order(self, rng, tmp_path):
        records = make_image_records(rng, ["a1", "a2"], ["p1", "p2"], [0, 1], dim=4)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_records(ingest_records(records, 4).iter_records(), a)
        write_records(ingest_records(list(reversed(records)), 4).iter_records(), b)
        assert a.read_bytes() == b.read_bytes()

    def test_missing_field_and_bad_json(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"kind":"image","adapter_id":"a","prompt_id":"p","seed":0}\n')
        with pytest.raises(DataError, match="vector"):
            list(read_records(path))
        path.write_text("not json\n")
        with pytest.raises(FormatError):
            list(read_records(path))

    def test_float32_values_survive_json(self, tmp_path):
        value = np.float32(0.1)  # not exactly representable; repr must round-trip
        rec = GenerationRecord("image", None, "p", 0, np.array([value, 1.0], dtype=np.float32))
        path = tmp_path / "c.jsonl"
        write_records([rec], path)
        (loaded,) = list(read_records(path))
        assert loaded.vector.tobytes() == rec.vector.tobytes()


class TestSidecar:
    def test_round_trip(self, rng, tmp_path):
        records = make_image_records(rng, ["a1", "a2"], ["p1", "p2"], [0, 1], dim=4)
        records.append(GenerationRecord("text", None, "caption", None, vec(1, 2, 3, 4)))
        corpus = ingest_records(records, 4)
        path = tmp_path / "c.crls"
        write_sidecar(corpus, path)
        loaded = open_sidecar(path)
        assert list(loaded.iter_records()) == list(corpus.iter_records())
        assert loaded.manifest.records == corpus.manifest.records

    def test_load_corpus_sniffs_magic(self, rng, tmp_path):
        corpus = ingest_records(make_image_records(rng, ["a1"], ["p1"], [0], dim=4), 4)
        path = tmp_path / "c.bin"
        write_sidecar(corpus, path)
        assert load_corpus(path).manifest.records == corpus.manifest.records

    def test_truncation_detected(self, rng, tmp_path):
        corpus = ingest_records(make_image_records(rng, ["a1"], ["p1"], [0, 1], dim=4), 4)
        path = tmp_path / "c.crls"
        write_sidecar(corpus, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-7])
        with pytest.raises(FormatError):
            open_sidecar(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "c.crls"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(FormatError):
            open_sidecar(path)

    def test_dim_check(self, rng, tmp_path):
        corpus = ingest_records(make_image_records(rng, ["a1"], ["p1"], [0], dim=4), 4)
        path = tmp_path / "c.crls"
        write_sidecar(corpus, path)
        with pytest.raises(DimensionMismatchError):
            open_sidecar(path, expected_dim=8)


class TestPromptSets:
    def _write(self, path, rows, role="retrieval"):
        lines = ["prompt_id\tcategory\tsubcategory\ttext\trole"]
        for pid, text in rows:
            lines.append(f"{pid}\tcat\tsub\t{text}\t{role}")
        path.write_text("\n".join(lines) + "\n")

    def test_load_and_ids(self, tmp_path):
        path = tmp_path / "p.tsv"
        self._write(path, [("q1", "a dog"), ("q2", "a cat")])
        ps = load_prompt_set(path, PromptRole.RETRIEVAL)
        assert ps.size == 2 and ps.role is PromptRole.RETRIEVAL
        assert ps.set_id  # stable content digest
        assert ps.set_id == load_prompt_set(path, PromptRole.RETRIEVAL).set_id

    def test_role_mismatch(self, tmp_path):
        path = tmp_path / "p.tsv"
        self._write(path, [("q1", "a dog")], role="indexing")
        with pytest.raises(DataError, match="role"):
            load_prompt_set(path, PromptRole.RETRIEVAL)

    def test_same_file_as_both_roles_fails(self, tmp_path):
        path = tmp_path / "p.tsv"
        self._write(path, [("q1", "a dog")], role="retrieval")
        retrieval = load_prompt_set(path, PromptRole.RETRIEVAL)
        with pytest.raises(DataError):
            load_prompt_set(path, PromptRole.INDEXING, disjoint_from=retrieval)

    def test_overlap_between_roles(self, tmp_path):
        a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
        self._write(a, [("q1", "a dog")], role="retrieval")
        self._write(b, [("i1", "a dog")], role="indexing")
        retrieval = load_prompt_set(a, PromptRole.RETRIEVAL)
        with pytest.raises(DataError, match="overlap"):
            load_prompt_set(b, PromptRole.INDEXING, disjoint_from=retrieval)

    def test_duplicate_prompt_id(self, tmp_path):
        path = tmp_path / "p.tsv"
        self._write(path, [("q1", "a dog"), ("q1", "a cat")])
        with pytest.raises(DuplicateKeyError):
            load_prompt_set(path, PromptRole.RETRIEVAL)

    def test_empty_set(self, tmp_path):
        path = tmp_path / "p.tsv"
        path.write_text("prompt_id\tcategory\tsubcategory\ttext\trole\n")
        with pytest.raises(DataError, match="empty"):
            load_prompt_set(path, PromptRole.RETRIEVAL)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "p.tsv"
        path.write_text("id\ttext\n")
        with pytest.raises(FormatError):
            load_prompt_set(path, PromptRole.RETRIEVAL)

    def test_save_round_trip(self, tmp_path):
        ps = make_prompt_set(["a dog", "a cat"])
        path = tmp_path / "p.tsv"
        save_prompt_set(ps, path)
        again = load_prompt_set(path, PromptRole.RETRIEVAL)
        assert again.prompts == ps.prompts
        assert again.set_id == ps.set_id


class TestIndexContainer:
    def _index(self, rng, **kwargs):
        records = make_image_records(rng, ["a1", "a2", "a3"], ["p1", "p2"], [0, 1], dim=6)
        return build_index(ingest_records(records, 6), **kwargs)

    def test_round_trip_bit_exact(self, rng, tmp_path):
        index = self._index(rng, created_at="2026-02-03T04:05:06Z")
        path = tmp_path / "i.ldxi"
        save_index(index, path)
        first = path.read_bytes()
        loaded = load_index(path)
        assert loaded == index
        assert loaded.index_id == index.index_id
        save_index(loaded, path)
        assert path.read_bytes() == first

    def test_build_report_survives_round_trip(self, rng, tmp_path):
        index = self._index(rng, created_at=utc_now_iso())
        path = tmp_path / "i.ldxi"
        save_index(index, path)
        report = load_index(path).build_report
        assert report is not None
        assert [e.adapter_id for e in report.entries] == ["a1", "a2", "a3"]

    def test_index_id_excludes_created_at(self, rng):
        a = self._index(rng, created_at="2026-01-01T00:00:00Z")
        b = build_index(
            ingest_records(
                make_image_records(np.random.default_rng(20260822), ["a1", "a2", "a3"],
                                   ["p1", "p2"], [0, 1], dim=6),
                6,
            ),
            created_at="2027-12-31T23:59:59Z",
        )
        assert a.created_at != b.created_at
        assert a.index_id == b.index_id

    def test_checksum_mismatch(self, rng, tmp_path):
        index = self._index(rng)
        path = tmp_path / "i.ldxi"
        save_index(index, path)
        blob = bytearray(path.read_bytes())
        blob[30] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(ChecksumError):
            load_index(path)

    def test_truncation(self, rng, tmp_path):
        index = self._index(rng)
        path = tmp_path / "i.ldxi"
        save_index(index, path)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(ChecksumError):
            load_index(path)

    def test_version_mismatch(self, rng, tmp_path):
        index = self._index(rng)
        path = tmp_path / "i.ldxi"
        save_index(index, path)
        blob = bytearray(path.read_bytes())
        blob[4] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="version"):
            load_index(path)

    def test_mixed_dim_rejected(self, rng):
        from loradex.store import CorpusIndex

        index = self._index(rng)
        sigs = dict(index.signatures)
        victim = sigs["a1"]
        victim.dim = 8
        with pytest.raises(DimensionMismatchError):
            CorpusIndex(sigs, dim=6, encoder_tag=index.encoder_tag,
                        created_at=index.created_at, manifest=index.manifest)
