import json
import math

import numpy as np
import pytest

from brainet.errors import ConfigError, DataError
from brainet.preprocess import (
    ColumnSchema,
    RawTable,
    convert_units,
    dummy_encode,
    knn_impute,
    load_matrix,
    load_schema,
    parse_csv,
    preprocess,
    save_matrix,
    zscore_normalize,
)


def schema_basic():
    return [
        ColumnSchema(name="a", kind="continuous"),
        ColumnSchema(name="b", kind="continuous"),
        ColumnSchema(name="y", kind="label"),
    ]


def write_csv(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestParseCsv:
    def test_missing_cell_parsed(self, tmp_path):
        path = write_csv(tmp_path, "a,b,y\n1,2,0\n3,,1\n5,6,0\n")
        table = parse_csv(path, schema_basic())
        assert table.n_rows == 3
        assert table.cells[1][1] is None
        assert table.cells[0] == (1.0, 2.0, 0)

    def test_header_schema_mismatch(self, tmp_path):
        path = write_csv(tmp_path, "a,y\n1,0\n")
        with pytest.raises(DataError, match="schema mismatch"):
            parse_csv(path, schema_basic())

    def test_invalid_label(self, tmp_path):
        path = write_csv(tmp_path, "a,b,y\n1,2,2\n")
        with pytest.raises(DataError, match="invalid label"):
            parse_csv(path, schema_basic())

    def test_malformed_row_width(self, tmp_path):
        path = write_csv(tmp_path, "a,b,y\n1,2,0,9\n")
        with pytest.raises(DataError, match="row width"):
            parse_csv(path, schema_basic())

    def test_unparseable_numeric(self, tmp_path):
        path = write_csv(tmp_path, "a,b,y\nfoo,2,0\n")
        with pytest.raises(DataError, match="unparseable numeric"):
            parse_csv(path, schema_basic())

    def test_duplicate_header(self, tmp_path):
        path = write_csv(tmp_path, "a,a,y\n1,2,0\n")
        with pytest.raises(DataError, match="duplicate header"):
            parse_csv(path, schema_basic())

    def test_missing_label_value(self, tmp_path):
        path = write_csv(tmp_path, "a,b,y\n1,2,\n")
        with pytest.raises(DataError, match="missing label"):
            parse_csv(path, schema_basic())

    def test_custom_missing_tokens_and_quoting(self, tmp_path):
        path = write_csv(tmp_path, 'a,b,y\n"1.5",?,0\n')
        table = parse_csv(path, schema_basic(), missing_tokens=("?",))
        assert table.cells[0] == (1.5, None, 0)

    def test_excluded_column_dropped(self, tmp_path):
        schema = schema_basic() + [ColumnSchema(name="junk", kind="excluded")]
        path = write_csv(tmp_path, "a,b,y,junk\n1,2,0,zzz\n")
        table = parse_csv(path, schema)
        assert [c.name for c in table.columns] == ["a", "b", "y"]

    def test_schema_json_roundtrip(self, tmp_path):
        doc = [
            {"name": "a", "kind": "continuous", "unit": "ug", "unit_scale_to_mg": 1e-3},
            {"name": "y", "kind": "label"},
        ]
        path = tmp_path / "schema.json"
        path.write_text(json.dumps(doc))
        schema = load_schema(path)
        assert schema[0].unit == "ug" and schema[0].unit_scale_to_mg == 1e-3


class TestSchemaValidation:
    def test_unit_without_scale_rejected(self):
        with pytest.raises(ConfigError):
            ColumnSchema(name="x", kind="continuous", unit="ug")

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            ColumnSchema(name="x", kind="wat")

    def test_label_required(self):
        with pytest.raises(DataError, match="label"):
            RawTable(
                columns=(ColumnSchema(name="a", kind="continuous"),),
                cells=((1.0,),),
                row_ids=("1",),
            )


class TestConvertUnits:
    def test_microgram_to_mg(self):
        table = RawTable(
            columns=(
                ColumnSchema(name="a", kind="continuous", unit="ug", unit_scale_to_mg=1e-3),
                ColumnSchema(name="y", kind="label"),
            ),
            cells=((500.0, 1), (250.0, 0)),
            row_ids=("1", "2"),
        )
        out = convert_units(table)
        assert out.cells[0][0] == 0.5
        assert out.columns[0].unit is None

    def test_untagged_unchanged(self):
        table = RawTable(columns=tuple(schema_basic()), cells=((1.0, 2.0, 0), (2.0, 1.0, 1)), row_ids=("1", "2"))
        assert convert_units(table) is table

    def test_zero_scale_rejected(self):
        col = ColumnSchema(name="a", kind="continuous", unit="ug", unit_scale_to_mg=1.0)
        object.__setattr__(col, "unit_scale_to_mg", 0.0)
        table = RawTable(
            columns=(col, ColumnSchema(name="y", kind="label")),
            cells=((500.0, 1), (1.0, 0)),
            row_ids=("1", "2"),
        )
        with pytest.raises(DataError, match="invalid scale"):
            convert_units(table)


class TestDummyEncode:
    def table_with_levels(self, levels):
        return RawTable(
            columns=(ColumnSchema(name="geno", kind="categorical"), ColumnSchema(name="y", kind="label")),
            cells=tuple((lvl, i % 2) for i, lvl in enumerate(levels)),
            row_ids=tuple(str(i) for i in range(len(levels))),
        )

    def test_three_levels_two_indicators(self):
        out = dummy_encode(self.table_with_levels(["a", "b", "c", "a"]))
        assert [c.name for c in out.columns] == ["geno=b", "geno=c", "y"]
        assert out.cells[0][:2] == (0.0, 0.0)  # baseline level "a"
        assert out.cells[1][:2] == (1.0, 0.0)
        assert out.cells[2][:2] == (0.0, 1.0)

    def test_two_levels_single_indicator(self):
        out = dummy_encode(self.table_with_levels(["x", "y", "y", "x"]))
        assert [c.name for c in out.columns] == ["geno=y", "y"]
        assert out.cells[1][0] == 1.0

    def test_all_numeric_identity(self):
        table = RawTable(columns=tuple(schema_basic()), cells=((1.0, 2.0, 0), (2.0, 3.0, 1)), row_ids=("1", "2"))
        assert dummy_encode(table) is table

    def test_single_level_rejected(self):
        with pytest.raises(DataError, match="degenerate categorical"):
            dummy_encode(self.table_with_levels(["a", "a", "a"]))

    def test_row_count_preserved_column_growth(self):
        table = self.table_with_levels(["a", "b", "c", "d"])
        out = dummy_encode(table)
        assert out.n_rows == table.n_rows
        assert len(out.columns) == len(table.columns) + (4 - 1) - 1

    def test_missing_categorical_stays_missing(self):
        table = RawTable(
            columns=(ColumnSchema(name="geno", kind="categorical"), ColumnSchema(name="y", kind="label")),
            cells=(("a", 0), (None, 1), ("b", 0)),
            row_ids=("1", "2", "3"),
        )
        out = dummy_encode(table)
        assert out.cells[1][0] is None


class TestKnnImpute:
    def test_noop_on_complete(self):
        table = RawTable(columns=tuple(schema_basic()), cells=((1.0, 2.0, 0), (2.0, 3.0, 1)), row_ids=("1", "2"))
        assert knn_impute(table, k=3) is table

    def test_hand_distance_case(self):
        # s1=(1,2), s2=(3,4), s3=(2,?); fill = mean(2,4) = 3 with effective k=2
        table = RawTable(
            columns=tuple(schema_basic()),
            cells=((1.0, 2.0, 0), (3.0, 4.0, 1), (2.0, None, 0)),
            row_ids=("1", "2", "3"),
        )
        out = knn_impute(table, k=5)
        assert out.cells[2][1] == 3.0

    def test_nearest_donor_used(self):
        table = RawTable(
            columns=tuple(schema_basic()),
            cells=((1.0, 10.0, 0), (100.0, 50.0, 1), (1.1, None, 0)),
            row_ids=("1", "2", "3"),
        )
        out = knn_impute(table, k=1)
        assert out.cells[2][1] == 10.0

    def test_tie_broken_by_row_index(self):
        # donors at equal distance; k=1 must take the earlier row
        table = RawTable(
            columns=tuple(schema_basic()),
            cells=((0.0, 7.0, 0), (2.0, 9.0, 1), (1.0, None, 0)),
            row_ids=("1", "2", "3"),
        )
        out = knn_impute(table, k=1)
        assert out.cells[2][1] == 7.0

    def test_unimputable_column(self):
        table = RawTable(
            columns=tuple(schema_basic()),
            cells=((1.0, None, 0), (2.0, None, 1)),
            row_ids=("1", "2"),
        )
        with pytest.raises(DataError, match="unimputable column"):
            knn_impute(table, k=2)

    def test_isolated_sample(self):
        table = RawTable(
            columns=tuple(schema_basic()),
            cells=((1.0, None, 0), (None, 2.0, 1), (None, 3.0, 1)),
            row_ids=("1", "2", "3"),
        )
        with pytest.raises(DataError, match="isolated sample"):
            knn_impute(table, k=2)

    def test_imputed_within_observed_range(self):
        rng = np.random.default_rng(17)
        cells = []
        for i in range(40):
            row = [float(rng.normal()), float(rng.normal()), i % 2]
            if rng.random() < 0.3:
                row[rng.integers(0, 2)] = None
            cells.append(tuple(row))
        cells[0] = (0.5, 1.0, 0)  # at least one complete row
        table = RawTable(columns=tuple(schema_basic()), cells=tuple(cells), row_ids=tuple(map(str, range(40))))
        out = knn_impute(table, k=5)
        for j in range(2):
            observed = [r[j] for r in table.cells if r[j] is not None]
            for r_in, r_out in zip(table.cells, out.cells):
                if r_in[j] is None:
                    assert min(observed) <= r_out[j] <= max(observed)

    def test_indicator_rounding(self):
        table = RawTable(
            columns=(
                ColumnSchema(name="g=b", kind="continuous", indicator=True),
                ColumnSchema(name="b", kind="continuous"),
                ColumnSchema(name="y", kind="label"),
            ),
            cells=((1.0, 1.0, 0), (1.0, 1.1, 1), (0.0, 0.9, 0), (None, 1.0, 1)),
            row_ids=("1", "2", "3", "4"),
        )
        out = knn_impute(table, k=3)
        assert out.cells[3][0] in (0.0, 1.0)


class TestZscore:
    def test_hand_case(self):
        table = RawTable(
            columns=(ColumnSchema(name="a", kind="continuous"), ColumnSchema(name="y", kind="label")),
            cells=((1.0, 0), (2.0, 1), (3.0, 0)),
            row_ids=("1", "2", "3"),
        )
        m = zscore_normalize(table)
        assert m.values[:, 0] == pytest.approx([-1.2247, 0.0, 1.2247], abs=1e-4)
        assert m.normalization.stds[0] == pytest.approx(math.sqrt(2.0 / 3.0))

    def test_constant_column_flagged(self):
        table = RawTable(
            columns=(ColumnSchema(name="a", kind="continuous"), ColumnSchema(name="y", kind="label")),
            cells=((5.0, 0), (5.0, 1), (5.0, 0)),
            row_ids=("1", "2", "3"),
        )
        m = zscore_normalize(table)
        assert np.all(m.values[:, 0] == 0.0)
        assert m.normalization.constant_flags == (True,)

    def test_idempotent_within_1e9(self):
        rng = np.random.default_rng(5)
        cells = tuple((float(v), i % 2) for i, v in enumerate(rng.normal(10, 3, 25)))
        table = RawTable(
            columns=(ColumnSchema(name="a", kind="continuous"), ColumnSchema(name="y", kind="label")),
            cells=cells,
            row_ids=tuple(map(str, range(25))),
        )
        once = zscore_normalize(table)
        rerun = RawTable(
            columns=table.columns,
            cells=tuple((float(v), int(l)) for v, l in zip(once.values[:, 0], once.labels)),
            row_ids=table.row_ids,
        )
        twice = zscore_normalize(rerun)
        assert np.max(np.abs(twice.values - once.values)) < 1e-9

    def test_normalized_mean_zero_std_one(self):
        rng = np.random.default_rng(6)
        cells = tuple((float(a), float(b), i % 2) for i, (a, b) in enumerate(rng.normal(5, 2, (30, 2))))
        table = RawTable(columns=tuple(schema_basic()), cells=cells, row_ids=tuple(map(str, range(30))))
        m = zscore_normalize(table)
        assert np.max(np.abs(m.values.mean(axis=0))) < 1e-9
        assert np.max(np.abs(m.values.std(axis=0) - 1.0)) < 1e-9


class TestPipelineDeterminism:
    def test_identical_input_identical_matrix(self, tmp_path):
        rng = np.random.default_rng(11)
        lines = ["a,b,y"]
        for i in range(30):
            a = "" if rng.random() < 0.2 else f"{rng.normal():.6f}"
            lines.append(f"{a},{rng.normal():.6f},{i % 2}")
        path = write_csv(tmp_path, "\n".join(lines) + "\n")
        m1 = preprocess(parse_csv(path, schema_basic()), k=5)
        m2 = preprocess(parse_csv(path, schema_basic()), k=5)
        assert np.array_equal(m1.values, m2.values)
        assert np.array_equal(m1.labels, m2.labels)

    def test_save_load_roundtrip(self, tmp_path):
        rng = np.random.default_rng(12)
        cells = tuple((float(a), float(b), i % 2) for i, (a, b) in enumerate(rng.normal(0, 1, (10, 2))))
        table = RawTable(columns=tuple(schema_basic()), cells=cells, row_ids=tuple(map(str, range(10))))
        m = zscore_normalize(table)
        save_matrix(m, tmp_path / "m.csv", tmp_path / "m.json")
        back = load_matrix(tmp_path / "m.csv", tmp_path / "m.json")
        assert np.array_equal(back.values, m.values)
        assert back.feature_names == m.feature_names
        assert back.normalization.means == m.normalization.means
