import json

import numpy as np
import pytest

from modelsynth.data import (
    BatchSchedule,
    Dataset,
    RowValidationError,
    SchemaError,
    SplitAssignment,
    batch_partition,
    derive_seed,
    load_ozone_csv,
    split_random,
    split_stratified,
)

OZONE_HEADER = "upo3,vdht,wdsp,hmdt,sbtp,ibht,dgpg,ibtp,vsty,day"
OZONE_ROW = "3,5710,4,28,40,2693,-25,87,250,33"


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadOzoneCsv:
    def test_shipped_file_has_330_rows_and_10_columns(self, ozone):
        assert ozone.n_rows == 330
        assert len(ozone.columns) == 10

    def test_header_only_file_is_an_error(self, tmp_path):
        path = _write(tmp_path, OZONE_HEADER + "\n")
        with pytest.raises(SchemaError, match="no data rows"):
            load_ozone_csv(path)

    def test_blank_cell_cites_the_row(self, tmp_path):
        bad = OZONE_ROW.replace("28", "")
        path = _write(tmp_path, f"{OZONE_HEADER}\n{OZONE_ROW}\n{bad}\n")
        with pytest.raises(RowValidationError, match="row 2"):
            load_ozone_csv(path)

    def test_missing_column_names_the_column(self, tmp_path):
        header = OZONE_HEADER.replace("hmdt", "humidity")
        path = _write(tmp_path, f"{header}\n{OZONE_ROW}\n")
        with pytest.raises(SchemaError, match="hmdt"):
            load_ozone_csv(path)

    def test_column_matching_is_case_sensitive(self, tmp_path):
        header = OZONE_HEADER.replace("upo3", "UPO3")
        path = _write(tmp_path, f"{header}\n{OZONE_ROW}\n")
        with pytest.raises(SchemaError, match="upo3"):
            load_ozone_csv(path)

    def test_non_numeric_cell_is_a_row_error(self, tmp_path):
        bad = OZONE_ROW.replace("2693", "high")
        path = _write(tmp_path, f"{OZONE_HEADER}\n{bad}\n")
        with pytest.raises(RowValidationError, match="row 1"):
            load_ozone_csv(path)

    def test_upo3_below_one_is_rejected(self, tmp_path):
        bad = "0," + OZONE_ROW.split(",", 1)[1]
        path = _write(tmp_path, f"{OZONE_HEADER}\n{bad}\n")
        with pytest.raises(RowValidationError, match="upo3"):
            load_ozone_csv(path)

    def test_column_order_does_not_matter(self, tmp_path):
        cols = OZONE_HEADER.split(",")
        row = OZONE_ROW.split(",")
        perm = list(reversed(range(10)))
        path = _write(tmp_path, ",".join(cols[i] for i in perm) + "\n"
                      + ",".join(row[i] for i in perm) + "\n")
        data = load_ozone_csv(path)
        assert data.column("upo3")[0] == 3
        assert data.column("day")[0] == 33


class TestDataset:
    def test_subset_keeps_original_ids(self, ozone):
        sub = ozone.subset([5, 17, 3])
        assert list(sub.ids) == [5, 17, 3]
        assert sub.column("upo3")[0] == ozone.column("upo3")[5]

    def test_values_are_read_only(self, ozone):
        with pytest.raises(ValueError):
            ozone.values[0, 0] = -1

    def test_unknown_column(self, ozone):
        with pytest.raises(SchemaError):
            ozone.column("nope")


class TestSplitRandom:
    def test_ozone_three_way_gives_110_each(self, ozone):
        split = split_random(ozone, 3, seed=7)
        assert [len(p) for p in split.parts] == [110, 110, 110]

    def test_k_equal_n_gives_singletons(self):
        data = Dataset.from_columns({"a": np.arange(8.0)})
        split = split_random(data, 8, seed=1)
        assert all(len(p) == 1 for p in split.parts)

    def test_same_seed_reproduces_exactly(self, ozone):
        s1 = split_random(ozone, 3, seed=99)
        s2 = split_random(ozone, 3, seed=99)
        assert s1.to_json() == s2.to_json()

    def test_different_seed_differs(self, ozone):
        s1 = split_random(ozone, 3, seed=1)
        s2 = split_random(ozone, 3, seed=2)
        assert s1.to_json() != s2.to_json()

    def test_partition_is_exhaustive_and_disjoint(self, ozone, rng):
        for k in (2, 3, 4, 7):
            split = split_random(ozone, k, seed=int(rng.integers(1 << 30)))
            all_ids = np.concatenate(split.parts)
            assert len(np.unique(all_ids)) == ozone.n_rows
            assert set(all_ids.tolist()) == set(range(330))
            sizes = [len(p) for p in split.parts]
            assert max(sizes) - min(sizes) <= 1

    def test_remainder_goes_to_lowest_indexed_parts(self):
        data = Dataset.from_columns({"a": np.arange(11.0)})
        split = split_random(data, 3, seed=0)
        assert [len(p) for p in split.parts] == [4, 4, 3]

    def test_k_larger_than_n_is_an_error(self):
        data = Dataset.from_columns({"a": np.arange(4.0)})
        with pytest.raises(ValueError):
            split_random(data, 5, seed=0)

    def test_k_below_two_is_an_error(self, ozone):
        with pytest.raises(ValueError):
            split_random(ozone, 1, seed=0)


class TestSplitStratified:
    def test_two_balanced_strata(self):
        data = Dataset.from_columns({
            "x": np.arange(120.0),
            "treat": np.repeat([0.0, 1.0], 60),
        })
        split = split_stratified(data, 3, seed=5, stratum="treat")
        treat = data.column("treat")
        for part in split.parts:
            per_level = [int((treat[part] == v).sum()) for v in (0.0, 1.0)]
            assert per_level == [20, 20]

    def test_singleton_stratum_is_allowed(self):
        data = Dataset.from_columns({
            "x": np.arange(7.0),
            "g": np.array([0, 0, 0, 0, 0, 0, 1.0]),
        })
        split = split_stratified(data, 3, seed=5, stratum="g")
        counts = sorted(int((data.column("g")[p] == 1.0).sum()) for p in split.parts)
        assert counts == [0, 0, 1]

    def test_unknown_stratum_column(self, ozone):
        with pytest.raises(SchemaError):
            split_stratified(ozone, 3, seed=5, stratum="treatment")

    def test_per_level_counts_differ_by_at_most_one(self, rng):
        for trial in range(5):
            n = int(rng.integers(30, 200))
            levels = rng.integers(0, 4, n).astype(float)
            data = Dataset.from_columns({"x": rng.normal(size=n), "g": levels})
            k = int(rng.integers(2, 6))
            split = split_stratified(data, k, seed=trial, stratum="g")
            g = data.column("g")
            for lev in np.unique(levels):
                counts = [int((g[p] == lev).sum()) for p in split.parts]
                assert max(counts) - min(counts) <= 1


class TestBatchPartition:
    def test_110_by_10_gives_11_batches(self, ozone):
        split = split_random(ozone, 3, seed=7)
        sched = batch_partition(split.parts[0], 10, seed=3)
        assert len(sched.batches) == 11
        assert all(len(b) == 10 for b in sched.batches)

    def test_single_full_batch(self):
        sched = batch_partition(np.arange(5), 5, seed=0)
        assert len(sched.batches) == 1

    def test_remainder_batch_is_last_and_short(self):
        sched = batch_partition(np.arange(7), 3, seed=0)
        assert [len(b) for b in sched.batches] == [3, 3, 1]

    def test_concatenation_is_a_permutation(self, rng):
        part = rng.choice(1000, size=64, replace=False)
        sched = batch_partition(part, 10, seed=11)
        assert sorted(sched.all_ids().tolist()) == sorted(part.tolist())

    def test_deterministic_per_seed(self):
        a = batch_partition(np.arange(30), 7, seed=4)
        b = batch_partition(np.arange(30), 7, seed=4)
        assert a.to_json() == b.to_json()

    def test_oversized_batch_is_an_error(self):
        with pytest.raises(ValueError):
            batch_partition(np.arange(5), 6, seed=0)

    def test_zero_batch_size_is_an_error(self):
        with pytest.raises(ValueError):
            batch_partition(np.arange(5), 0, seed=0)


class TestSerialization:
    def test_split_json_round_trip(self, ozone, tmp_path):
        split = split_random(ozone, 3, seed=7)
        path = tmp_path / "split.json"
        path.write_text(json.dumps(split.to_json()))
        back = SplitAssignment.from_json(json.loads(path.read_text()))
        assert back.to_json() == split.to_json()

    def test_schedule_json_round_trip(self):
        sched = batch_partition(np.arange(23), 5, seed=9)
        back = BatchSchedule.from_json(sched.to_json())
        assert back.to_json() == sched.to_json()

    def test_invalid_partition_rejected(self):
        with pytest.raises(ValueError):
            SplitAssignment(2, 0, (np.array([0, 1]), np.array([1, 2])))


class TestDeriveSeed:
    def test_known_value_is_stable(self):
        # frozen: sha256("7:split")[:8] little-endian
        assert derive_seed(7, "split") == 15753112634979412836

    def test_labels_separate_streams(self):
        assert derive_seed(7, "split") != derive_seed(7, "batches")
        assert derive_seed(7, "split") != derive_seed(8, "split")
