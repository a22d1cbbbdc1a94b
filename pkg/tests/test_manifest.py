import pytest

from verbadapt.manifest import (
    ManifestError,
    config_hash,
    derive_seeds,
    file_sha256,
    read_manifest,
    start_run,
    write_manifest,
)


class TestConfigHash:
    def test_key_order_independent(self):
        assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})

    def test_sensitive_to_values(self):
        assert config_hash({"a": 1}) != config_hash({"a": 2})


class TestManifestFile:
    def test_round_trip_includes_hash(self, tmp_path):
        f = tmp_path / "manifest.txt"
        write_manifest(f, {"epochs": 3, "seed": 0})
        loaded = read_manifest(f)
        assert loaded["epochs"] == "3"
        assert loaded["config_hash"] == config_hash({"epochs": 3, "seed": 0})

    def test_malformed_line(self, tmp_path):
        f = tmp_path / "manifest.txt"
        f.write_text("no separator here\n")
        with pytest.raises(ManifestError):
            read_manifest(f)

    def test_file_sha256_stable(self, tmp_path):
        f = tmp_path / "data.txt"
        f.write_text("hello\n")
        assert file_sha256(f) == file_sha256(f)
        g = tmp_path / "other.txt"
        g.write_text("world\n")
        assert file_sha256(f) != file_sha256(g)


class TestStartRun:
    def test_manifest_written_first(self, tmp_path):
        run = start_run(tmp_path / "run", {"seed": 1})
        assert (run / "manifest.txt").exists()

    def test_resume_with_same_config_allowed(self, tmp_path):
        start_run(tmp_path / "run", {"seed": 1})
        start_run(tmp_path / "run", {"seed": 1})

    def test_resume_with_altered_config_refused(self, tmp_path):
        start_run(tmp_path / "run", {"seed": 1})
        with pytest.raises(ManifestError):
            start_run(tmp_path / "run", {"seed": 2})


class TestDeriveSeeds:
    def test_deterministic_and_distinct(self):
        a = derive_seeds(7, 5)
        assert a == derive_seeds(7, 5)
        assert len(set(a)) == 5

    def test_base_seed_matters(self):
        assert derive_seeds(7, 3) != derive_seeds(8, 3)
