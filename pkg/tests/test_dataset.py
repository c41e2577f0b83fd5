import csv

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ilcbox import (CsvSchema, SplitPlan, denormalize, ingest_csv, normalize,
                    stratified_split)
from ilcbox.dataset import DATA_DIR, Dataset, IngestError, SplitError, load_wbc


def test_wbc_ingestion_counts(wbc):
    assert len(wbc.cases) == 683
    assert wbc.class_counts == {"benign": 444, "malignant": 239}


def test_wbc_raw_file_has_699_rows_16_missing():
    rows = list(csv.reader(open(DATA_DIR / "wbc.csv")))
    assert len(rows) == 699
    assert sum(1 for r in rows if "?" in r) == 16


def test_wbc_missing_policy_error():
    with pytest.raises(IngestError, match="missing"):
        load_wbc(missing_policy="error")


def test_pbc_ingestion_counts(pbc):
    assert len(pbc.cases) == 5473
    assert pbc.class_counts == {"1": 4913, "2": 329, "3": 28, "4": 88, "5": 115}


def test_empty_file_errors(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(IngestError):
        ingest_csv(path, CsvSchema())


def test_unparseable_row_names_row_number(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2,a\n1,2,b\nx,y,b\n")
    with pytest.raises(IngestError, match="row 3"):
        ingest_csv(path, CsvSchema())


def test_unknown_label_errors(tmp_path):
    path = tmp_path / "labels.csv"
    path.write_text("1,2,a\n3,4,weird\n")
    with pytest.raises(IngestError, match="unknown label"):
        ingest_csv(path, CsvSchema(expected_classes=("a", "b")))


def _tiny(tmp_path, rows):
    path = tmp_path / "tiny.csv"
    path.write_text("\n".join(",".join(map(str, r)) for r in rows) + "\n")
    return ingest_csv(path, CsvSchema())


def test_normalize_boundaries(tmp_path):
    ds = _tiny(tmp_path, [[1, 0, "a"], [10, 100, "a"], [4, 25, "b"]])
    norm = normalize(ds)
    assert norm.cases[0].values[0] == 0.0  # min of a 1..10 attribute
    assert norm.cases[2].values[1] == 0.25  # 25 on a 0..100 attribute
    assert norm.normalization == "min_max_unit"


def test_normalize_raw_is_identity(tmp_path):
    ds = _tiny(tmp_path, [[1, 2, "a"], [3, 4, "b"]])
    assert normalize(ds, "raw") is ds


def test_constant_attribute_maps_to_zero(tmp_path):
    ds = _tiny(tmp_path, [[7, 1, "a"], [7, 2, "b"]])
    norm = normalize(ds)
    assert all(c.values[0] == 0.0 for c in norm.cases)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(min_value=-1e6, max_value=1e6,
                                   allow_nan=False, allow_infinity=False),
                         min_size=3, max_size=3),
                min_size=2, max_size=20))
def test_normalize_round_trip(rows):
    from ilcbox.dataset import AttributeMeta, LabeledCase
    import numpy as np
    mat = np.array(rows)
    attrs = [AttributeMeta(f"X{j}", j, float(mat[:, j].min()), float(mat[:, j].max()),
                           int(len(np.unique(mat[:, j])))) for j in range(3)]
    cases = [LabeledCase(tuple(r), "a", i) for i, r in enumerate(rows)]
    ds = Dataset("t", attrs, cases)
    back = denormalize(normalize(ds))
    spans = [max(1.0, a.observed_max - a.observed_min) for a in attrs]
    for orig, rec in zip(ds.cases, back.cases):
        for a, b, span in zip(orig.values, rec.values, spans):
            assert abs(a - b) <= 1e-12 * span


def test_wbc_normalize_round_trip_absolute(wbc):
    back = denormalize(normalize(wbc))
    for orig, rec in zip(wbc.cases, back.cases):
        for a, b in zip(orig.values, rec.values):
            assert abs(a - b) <= 1e-12


def test_pbc_kfold_sizes(pbc):
    plan = SplitPlan(kind="stratified_kfold", fractions=(0.9, 0.1, 0.0), fold_count=10, seed=3)
    parts = stratified_split(pbc, plan)
    assert len(parts) == 10
    for p in parts:
        assert abs(len(p.test.cases) - 548) <= 6
        assert abs(len(p.train.cases) - 4431) <= 10
        assert abs(len(p.validation.cases) - 494) <= 10
        assert len(p.train.cases) + len(p.validation.cases) + len(p.test.cases) == 5473


def test_holdout_full_train(wbc):
    plan = SplitPlan(kind="holdout", fractions=(1.0, 0.0, 0.0), seed=1)
    part = stratified_split(wbc, plan)[0]
    assert len(part.train.cases) == len(wbc.cases)
    assert not part.validation.cases and not part.test.cases


def test_wbc_kfold_stratification(wbc):
    plan = SplitPlan(kind="stratified_kfold", fractions=(0.9, 0.1, 0.0), fold_count=10, seed=7)
    parts = stratified_split(wbc, plan)
    for p in parts:
        counts = p.test.class_counts
        assert abs(counts.get("benign", 0) - 44.4) <= 1
        assert abs(counts.get("malignant", 0) - 23.9) <= 1


def test_partitions_disjoint_and_complete(wbc):
    plan = SplitPlan(kind="stratified_kfold", fractions=(0.9, 0.1, 0.0), fold_count=5, seed=2)
    parts = stratified_split(wbc, plan)
    all_rows = sorted(c.source_row for c in wbc.cases)
    for p in parts:
        rows = sorted(c.source_row for part in (p.train, p.validation, p.test)
                      for c in part.cases)
        assert rows == all_rows
    test_rows = sorted(c.source_row for p in parts for c in p.test.cases)
    assert test_rows == all_rows


def test_split_determinism(wbc):
    plan = SplitPlan(kind="stratified_kfold", fractions=(0.9, 0.1, 0.0), fold_count=10, seed=11)
    a = stratified_split(wbc, plan)
    b = stratified_split(wbc, plan)
    for pa, pb in zip(a, b):
        assert [c.source_row for c in pa.train.cases] == [c.source_row for c in pb.train.cases]
        assert [c.source_row for c in pa.test.cases] == [c.source_row for c in pb.test.cases]


def test_class_smaller_than_folds_errors(tmp_path):
    ds = _tiny(tmp_path, [[1, 1, "rare"]] * 3 + [[2, 2, "common"]] * 40)
    with pytest.raises(SplitError, match="rare"):
        stratified_split(ds, SplitPlan(kind="stratified_kfold", fold_count=5, seed=0,
                                       fractions=(0.9, 0.1, 0.0)))


def test_snapshot_round_trip(wbc):
    text = wbc.snapshot()
    back = Dataset.from_snapshot(text)
    assert back.class_counts == wbc.class_counts
    assert back.cases[0].values == wbc.cases[0].values
    assert back.snapshot() == text


def test_split_partitions_byte_identical(wbc):
    plan = SplitPlan(kind="stratified_kfold", fractions=(0.9, 0.1, 0.0),
                     fold_count=4, seed=33)
    a = stratified_split(wbc, plan)
    b = stratified_split(wbc, plan)
    for pa, pb in zip(a, b):
        assert pa.train.snapshot() == pb.train.snapshot()
        assert pa.validation.snapshot() == pb.validation.snapshot()
        assert pa.test.snapshot() == pb.test.snapshot()
