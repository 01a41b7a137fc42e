"""Counterfactual model fitting, scoring, labeling, and persistence."""

from __future__ import annotations

import json

import numpy as np
import pytest

from samdetect import (
    ConfigError,
    DataError,
    Dataset,
    FeatureFitMeta,
    ModelFormatError,
    RansacConfig,
    SamModel,
    SamVariant,
    attribute,
    counterfactual,
    load_model,
    sam_fit,
    sam_label,
    sam_score,
    save_model,
)
from conftest import exact_plane_dataset


def _meta(d: int) -> tuple[FeatureFitMeta, ...]:
    return tuple(FeatureFitMeta(False, True, False) for _ in range(d))


def _zero_coef_model(intercepts) -> SamModel:
    intercepts = np.asarray(intercepts, dtype=np.float64)
    d = intercepts.shape[0]
    return SamModel(
        coefficients=np.zeros((d, d)),
        intercepts=intercepts,
        feature_names=tuple(f"f{i}" for i in range(d)),
        fit_meta=_meta(d),
    )


class TestVariant:
    @pytest.mark.parametrize(
        "alias,use_ransac,normalize",
        [
            ("sam++", True, True),
            ("sam+-", True, False),
            ("sam-+", False, True),
            ("sam--", False, False),
        ],
    )
    def test_alias_round_trip(self, alias, use_ransac, normalize):
        v = SamVariant.from_alias(alias)
        assert v.use_ransac is use_ransac
        assert v.normalize is normalize
        assert v.alias == alias

    def test_alias_case_insensitive(self):
        assert SamVariant.from_alias("SAM+-") == SamVariant(True, False)

    def test_unknown_alias(self):
        with pytest.raises(ConfigError):
            SamVariant.from_alias("sam**")

    def test_default_variant_is_plain(self):
        v = SamVariant()
        assert not v.use_ransac and not v.normalize


class TestSamFit:
    def test_exact_line_coefficients(self, exact_line):
        model = sam_fit(exact_line)
        np.testing.assert_allclose(
            model.coefficients, [[0.0, 0.5], [2.0, 0.0]], atol=1e-9
        )
        np.testing.assert_allclose(model.intercepts, [-0.5, 1.0], atol=1e-9)
        assert model.feature_names == ("a", "b")
        assert all(not m.used_ransac for m in model.fit_meta)

    def test_diagonal_always_zero(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(30, 200))
            d = int(rng.integers(2, 7))
            ds = Dataset(
                rng.standard_normal((n, d)),
                tuple(f"f{i}" for i in range(d)),
            )
            model = sam_fit(ds, seed=int(rng.integers(0, 2**32)))
            np.testing.assert_array_equal(np.diagonal(model.coefficients), 0.0)

    def test_independent_features_near_zero_coefficients(self):
        rng = np.random.default_rng(1)
        ds = Dataset(rng.standard_normal((10000, 4)), ("a", "b", "c", "d"))
        model = sam_fit(ds)
        off_diagonal = model.coefficients[~np.eye(4, dtype=bool)]
        assert np.max(np.abs(off_diagonal)) < 0.1

    def test_ransac_variant_on_clean_data_matches_plain(self, exact_line):
        plain = sam_fit(exact_line)
        robust = sam_fit(exact_line, SamVariant(use_ransac=True, normalize=False))
        np.testing.assert_allclose(robust.coefficients, plain.coefficients, atol=1e-9)
        assert all(m.used_ransac for m in robust.fit_meta)

    def test_ransac_config_seed_is_ignored(self):
        rng = np.random.default_rng(2)
        vals = rng.standard_normal((80, 3))
        vals[:10] += 20.0
        ds = Dataset(vals, ("a", "b", "c"))
        variant = SamVariant(use_ransac=True)
        a = sam_fit(ds, variant, ransac_cfg=RansacConfig(seed=1), seed=7)
        b = sam_fit(ds, variant, ransac_cfg=RansacConfig(seed=2), seed=7)
        np.testing.assert_array_equal(a.coefficients, b.coefficients)

    def test_deterministic_under_seed(self):
        rng = np.random.default_rng(3)
        ds = Dataset(rng.standard_normal((60, 3)), ("a", "b", "c"))
        variant = SamVariant(use_ransac=True)
        a = sam_fit(ds, variant, seed=5)
        b = sam_fit(ds, variant, seed=5)
        np.testing.assert_array_equal(a.coefficients, b.coefficients)

    def test_ransac_fallback_recorded_per_feature(self):
        rng = np.random.default_rng(4)
        ds = Dataset(rng.standard_normal((30, 2)), ("a", "b"))
        cfg = RansacConfig(min_samples=30, residual_threshold=1e-15)
        model = sam_fit(ds, SamVariant(use_ransac=True), ransac_cfg=cfg)
        assert all(not m.used_ransac for m in model.fit_meta)
        assert all(not m.converged for m in model.fit_meta)

    def test_normalize_variant_sets_default(self, exact_line):
        model = sam_fit(exact_line, SamVariant(use_ransac=False, normalize=True))
        assert model.normalize_default
        report = sam_score(model, np.array([[1.0, 5.0]]))
        assert report.normalized

    def test_zscore_records_inverse_std(self):
        rng = np.random.default_rng(5)
        z = rng.standard_normal(400)
        ds = Dataset(np.column_stack([z, 10.0 * z]), ("a", "b"))
        model = sam_fit(ds, zscore=True)
        assert model.zscore
        np.testing.assert_allclose(
            model.residual_scale,
            [1.0 / ds.values[:, 0].std(), 1.0 / ds.values[:, 1].std()],
            rtol=1e-12,
        )

    def test_zscore_constant_column_scale_one(self):
        rng = np.random.default_rng(6)
        vals = np.column_stack([np.full(50, 2.0), rng.standard_normal(50)])
        model = sam_fit(Dataset(vals, ("a", "b")), zscore=True)
        assert model.residual_scale[0] == 1.0

    def test_needs_two_features(self):
        with pytest.raises(DataError):
            sam_fit(Dataset(np.zeros((10, 1)), ("a",)))

    def test_needs_enough_rows(self):
        with pytest.raises(DataError):
            sam_fit(Dataset(np.zeros((3, 4)), ("a", "b", "c", "d")))


class TestModelValidation:
    def test_nonzero_diagonal_rejected(self):
        coef = np.array([[0.0, 1.0], [1.0, 0.5]])
        with pytest.raises(ModelFormatError, match=r"nonzero diagonal.*\[1\]\[1\]"):
            SamModel(coef, np.zeros(2), ("a", "b"), _meta(2))

    def test_non_finite_rejected(self):
        coef = np.array([[0.0, np.inf], [1.0, 0.0]])
        with pytest.raises(ModelFormatError):
            SamModel(coef, np.zeros(2), ("a", "b"), _meta(2))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ModelFormatError):
            SamModel(np.zeros((2, 3)), np.zeros(2), ("a", "b"), _meta(2))

    def test_meta_count_mismatch_rejected(self):
        with pytest.raises(ModelFormatError):
            SamModel(np.zeros((2, 2)), np.zeros(2), ("a", "b"), _meta(3))

    def test_arrays_frozen(self):
        model = _zero_coef_model([1.0, 2.0])
        with pytest.raises(ValueError):
            model.coefficients[0, 1] = 9.0


class TestCounterfactual:
    def test_worked_example(self, exact_line):
        model = sam_fit(exact_line)
        out = counterfactual(model, np.array([[1.0, 5.0]]))
        np.testing.assert_allclose(out, [[2.0, 3.0]], atol=1e-9)

    def test_on_model_point_is_fixed(self, exact_line):
        model = sam_fit(exact_line)
        out = counterfactual(model, np.array([[1.0, 3.0]]))
        np.testing.assert_allclose(out, [[1.0, 3.0]], atol=1e-9)

    def test_zero_coefficients_broadcast_intercepts(self):
        model = _zero_coef_model([1.0, -2.0, 5.0])
        out = counterfactual(model, np.zeros((4, 3)))
        np.testing.assert_array_equal(out, np.tile([1.0, -2.0, 5.0], (4, 1)))

    def test_dimension_mismatch(self, exact_line):
        model = sam_fit(exact_line)
        with pytest.raises(DataError):
            counterfactual(model, np.zeros((2, 3)))


class TestSamScore:
    def test_raw_residuals_and_score(self, exact_line):
        model = sam_fit(exact_line)
        report = sam_score(model, np.array([[1.0, 5.0]]))
        np.testing.assert_allclose(report.residuals, [[-1.0, 2.0]], atol=1e-9)
        np.testing.assert_allclose(report.scores, [3.0], atol=1e-9)
        np.testing.assert_allclose(report.counterfactuals, [[2.0, 3.0]], atol=1e-9)
        assert not report.normalized

    def test_normalized_by_observed(self, exact_line):
        model = sam_fit(exact_line)
        report = sam_score(model, np.array([[1.0, 5.0]]), normalize=True)
        # |-1|/(1+eps) + |2|/(5+eps) with eps = 1e-9.
        np.testing.assert_allclose(report.scores, [1.4], atol=1e-6)
        assert report.normalized

    def test_normalized_by_counterfactual(self, exact_line):
        model = sam_fit(exact_line)
        report = sam_score(
            model, np.array([[1.0, 5.0]]), normalize=True, denominator="counterfactual"
        )
        # |-1|/(2+eps) + |2|/(3+eps) = 7/6.
        np.testing.assert_allclose(report.scores, [7.0 / 6.0], atol=1e-6)

    def test_score_is_rowsum_of_abs_residuals(self):
        rng = np.random.default_rng(0)
        ds = Dataset(rng.standard_normal((100, 5)), tuple("abcde"))
        model = sam_fit(ds)
        X = rng.standard_normal((40, 5))
        for kwargs in (
            dict(),
            dict(normalize=True),
            dict(normalize=True, denominator="counterfactual"),
        ):
            report = sam_score(model, X, **kwargs)
            np.testing.assert_allclose(
                report.scores, np.abs(report.residuals).sum(axis=1), rtol=1e-12
            )

    def test_scores_nonnegative(self):
        rng = np.random.default_rng(1)
        ds = Dataset(rng.standard_normal((50, 3)), ("a", "b", "c"))
        model = sam_fit(ds)
        report = sam_score(model, rng.standard_normal((200, 3)))
        assert (report.scores >= 0).all()

    def test_self_consistency_on_noiseless_data(self):
        ds = exact_plane_dataset(n=500, seed=0)
        model = sam_fit(ds)
        report = sam_score(model, ds.values)
        assert np.max(np.abs(report.residuals)) < 1e-8
        assert np.max(report.scores) < 1e-8

    def test_zscore_scales_residuals(self):
        rng = np.random.default_rng(2)
        z = rng.standard_normal(400)
        ds = Dataset(np.column_stack([z, 10.0 * z]), ("a", "b"))
        model = sam_fit(ds, zscore=True)
        delta = 0.5
        X = np.array([[z[0] + delta, 10.0 * z[0]]])
        report = sam_score(model, X)
        expected = abs(delta) * model.residual_scale[0] + abs(10 * delta) * (
            model.residual_scale[1]
        )
        np.testing.assert_allclose(report.scores, [expected], rtol=1e-9)

    def test_monotone_in_single_feature_deviation(self):
        model = _zero_coef_model([1.0, -2.0, 5.0])
        base = np.array([1.0, -2.0, 5.0])
        scores = []
        for deviation in (0.0, 0.5, 1.0, 2.0, 10.0):
            X = base.copy()[None, :]
            X[0, 1] += deviation
            scores.append(sam_score(model, X).scores[0])
        assert all(b >= a for a, b in zip(scores, scores[1:]))
        assert scores[-1] > scores[0]

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(3)
        ds = Dataset(rng.standard_normal((150, 4)), ("a", "b", "c", "d"))
        model = sam_fit(ds)
        X = rng.standard_normal((30, 4))
        report = sam_score(model, X)

        perm = np.array([2, 0, 3, 1])
        permuted = SamModel(
            coefficients=model.coefficients[np.ix_(perm, perm)],
            intercepts=model.intercepts[perm],
            feature_names=tuple(model.feature_names[i] for i in perm),
            fit_meta=tuple(model.fit_meta[i] for i in perm),
        )
        report_p = sam_score(permuted, X[:, perm])
        np.testing.assert_allclose(report_p.residuals, report.residuals[:, perm], atol=1e-12)
        np.testing.assert_allclose(report_p.scores, report.scores, rtol=1e-12)

    def test_epsilon_must_be_positive(self, exact_line):
        model = sam_fit(exact_line)
        with pytest.raises(ConfigError):
            sam_score(model, np.zeros((1, 2)), normalize=True, epsilon=0.0)

    def test_unknown_denominator(self, exact_line):
        model = sam_fit(exact_line)
        with pytest.raises(ConfigError):
            sam_score(model, np.zeros((1, 2)), denominator="weird")

    def test_non_finite_input(self, exact_line):
        model = sam_fit(exact_line)
        with pytest.raises(DataError):
            sam_score(model, np.array([[np.nan, 0.0]]))

    def test_dimension_mismatch(self, exact_line):
        model = sam_fit(exact_line)
        with pytest.raises(DataError):
            sam_score(model, np.zeros((1, 5)))


class TestSamLabel:
    def test_worked_example(self):
        labels = sam_label(np.array([0.0, 10.0]), percentile=50.0)
        np.testing.assert_array_equal(labels, [1, -1])

    def test_strictly_above_threshold_only(self):
        # percentile 90 of 0..9 is 8.1; only the maximum exceeds it.
        labels = sam_label(np.arange(10.0), percentile=90.0)
        assert (labels == -1).sum() == 1
        assert labels[-1] == -1

    def test_all_equal_scores_all_normal(self):
        labels = sam_label(np.full(8, 3.0), percentile=50.0)
        np.testing.assert_array_equal(labels, 1)

    def test_accepts_report(self, exact_line):
        model = sam_fit(exact_line)
        report = sam_score(model, np.array([[1.0, 5.0], [1.0, 3.0]]))
        labels = sam_label(report, percentile=50.0)
        np.testing.assert_array_equal(labels, [-1, 1])

    @pytest.mark.parametrize("bad", [-1.0, 100.5])
    def test_percentile_bounds(self, bad):
        with pytest.raises(ConfigError):
            sam_label(np.arange(4.0), percentile=bad)


class TestAttribute:
    def test_worked_example(self, exact_line):
        model = sam_fit(exact_line)
        report = sam_score(model, np.array([[1.0, 5.0]]))
        ranked = attribute(report, 0)
        assert [name for name, _, _ in ranked] == ["b", "a"]
        np.testing.assert_allclose([m for _, m, _ in ranked], [2.0, 1.0], atol=1e-9)
        np.testing.assert_allclose([s for _, _, s in ranked], [2 / 3, 1 / 3], atol=1e-9)

    def test_shares_sum_to_one(self):
        rng = np.random.default_rng(0)
        ds = Dataset(rng.standard_normal((60, 4)), ("a", "b", "c", "d"))
        model = sam_fit(ds)
        report = sam_score(model, rng.standard_normal((5, 4)))
        for i in range(5):
            shares = [s for _, _, s in attribute(report, i)]
            assert abs(sum(shares) - 1.0) < 1e-12

    def test_zero_score_zero_shares(self):
        model = _zero_coef_model([1.0, 2.0])
        report = sam_score(model, np.array([[1.0, 2.0]]))
        ranked = attribute(report, 0)
        assert all(s == 0.0 for _, _, s in ranked)

    def test_negative_index(self, exact_line):
        model = sam_fit(exact_line)
        report = sam_score(model, np.array([[1.0, 5.0], [0.0, 1.0]]))
        assert attribute(report, -2) == attribute(report, 0)

    def test_index_out_of_range(self, exact_line):
        model = sam_fit(exact_line)
        report = sam_score(model, np.array([[1.0, 5.0]]))
        with pytest.raises(DataError):
            attribute(report, 1)


class TestPersistence:
    def test_round_trip_preserves_everything(self, tmp_path, exact_line):
        model = sam_fit(
            exact_line,
            SamVariant(use_ransac=False, normalize=True),
            zscore=True,
        )
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        np.testing.assert_array_equal(back.coefficients, model.coefficients)
        np.testing.assert_array_equal(back.intercepts, model.intercepts)
        assert back.feature_names == model.feature_names
        assert back.fit_meta == model.fit_meta
        assert back.zscore == model.zscore
        assert back.normalize_default == model.normalize_default
        np.testing.assert_array_equal(back.residual_scale, model.residual_scale)
        assert back.format_version == 1

    def test_round_trip_scores_identically(self, tmp_path):
        rng = np.random.default_rng(0)
        ds = Dataset(rng.standard_normal((80, 3)), ("a", "b", "c"))
        model = sam_fit(ds)
        path = tmp_path / "m.json"
        save_model(model, path)
        back = load_model(path)
        X = rng.standard_normal((20, 3))
        np.testing.assert_array_equal(
            sam_score(back, X).scores, sam_score(model, X).scores
        )

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_model(tmp_path / "absent.json")

    def test_truncated_json_reports_byte_offset(self, tmp_path, exact_line):
        path = tmp_path / "m.json"
        save_model(sam_fit(exact_line), path)
        raw = path.read_bytes()[: len(path.read_bytes()) // 2]
        path.write_bytes(raw)
        with pytest.raises(ModelFormatError, match="byte"):
            load_model(path)

    def _mutated(self, tmp_path, exact_line, mutate):
        path = tmp_path / "m.json"
        save_model(sam_fit(exact_line), path)
        doc = json.loads(path.read_text())
        mutate(doc)
        path.write_text(json.dumps(doc))
        return path

    def test_unknown_format_version(self, tmp_path, exact_line):
        path = self._mutated(
            tmp_path, exact_line, lambda d: d.update(format_version=99)
        )
        with pytest.raises(ModelFormatError, match="format_version"):
            load_model(path)

    def test_missing_field(self, tmp_path, exact_line):
        path = self._mutated(tmp_path, exact_line, lambda d: d.pop("intercepts"))
        with pytest.raises(ModelFormatError, match="intercepts"):
            load_model(path)

    def test_wrong_coefficient_count(self, tmp_path, exact_line):
        path = self._mutated(
            tmp_path, exact_line, lambda d: d["coefficients"].append(0.0)
        )
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_nonzero_diagonal_in_file(self, tmp_path, exact_line):
        def corrupt(d):
            d["coefficients"][0] = 0.75  # position [0][0] in row-major order

        path = self._mutated(tmp_path, exact_line, corrupt)
        with pytest.raises(ModelFormatError, match="nonzero diagonal"):
            load_model(path)

    def test_ill_typed_field(self, tmp_path, exact_line):
        path = self._mutated(
            tmp_path, exact_line, lambda d: d.update(feature_names="ab")
        )
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_meta_count_mismatch_in_file(self, tmp_path, exact_line):
        path = self._mutated(
            tmp_path, exact_line, lambda d: d["fit_meta"]["features"].pop()
        )
        with pytest.raises(ModelFormatError):
            load_model(path)
