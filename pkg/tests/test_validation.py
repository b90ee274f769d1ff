"""Tests for the shared argument-validation helpers."""

import numpy as np
import pytest

from stylebalance.exceptions import (DataError, DimensionError,
                                     PreconditionError)
from stylebalance.tensors import FeatureMap, Image
from stylebalance.validation import (as_feature_map, as_image,
                                     check_count, check_identifier,
                                     check_nonnegative, check_positive,
                                     check_same_channels, check_same_shape)


class TestScalarChecks:
    def test_positive(self):
        assert check_positive(2, "x") == 2.0
        for bad in (0, -1, float("nan"), float("inf")):
            with pytest.raises(PreconditionError, match="x"):
                check_positive(bad, "x")

    def test_nonnegative(self):
        assert check_nonnegative(0, "x") == 0.0
        with pytest.raises(PreconditionError):
            check_nonnegative(-1e-300, "x")

    def test_count(self):
        assert check_count(3, "n") == 3
        assert check_count(0, "n") == 0
        with pytest.raises(PreconditionError):
            check_count(2.5, "n")
        with pytest.raises(PreconditionError):
            check_count(1, "n", minimum=2)


class TestShapeChecks:
    def test_same_shape(self):
        check_same_shape(np.zeros((2, 3)), np.zeros((2, 3)), "maps")
        with pytest.raises(DimensionError, match="maps"):
            check_same_shape(np.zeros((2, 3)), np.zeros((3, 2)), "maps")

    def test_same_channels(self):
        check_same_channels(3, 3, "images")
        with pytest.raises(DimensionError, match="4 vs 3"):
            check_same_channels(4, 3, "images")


class TestCoercions:
    def test_as_image_passthrough(self):
        img = Image(np.zeros((2, 2, 3)))
        assert as_image(img) is img

    def test_as_image_from_array(self):
        out = as_image(np.full((2, 2, 1), 0.5))
        assert isinstance(out, Image)
        assert out.channels == 1

    def test_as_image_still_validates(self):
        with pytest.raises(PreconditionError):
            as_image(np.full((2, 2, 3), 2.0))

    def test_as_feature_map(self):
        fm = FeatureMap(np.zeros((1, 1, 1)))
        assert as_feature_map(fm) is fm
        made = as_feature_map(np.ones((2, 2, 3)), nonneg=True)
        assert made.nonneg


class TestIdentifiers:
    @pytest.mark.parametrize("good", ["a", "styleA", "b1_r2", "x-y.z", "0"])
    def test_accepted(self, good):
        assert check_identifier(good, "id") == good

    @pytest.mark.parametrize("bad", ["", "has space", "a,b", "tab\t", "é",
                                     "new\nline"])
    def test_rejected(self, bad):
        with pytest.raises(DataError, match="valid identifier"):
            check_identifier(bad, "id")

    def test_non_string_rejected(self):
        with pytest.raises(DataError):
            check_identifier(7, "id")

    def test_where_appears_in_message(self):
        with pytest.raises(DataError, match="row 3"):
            check_identifier("bad id", "id", "row 3")
