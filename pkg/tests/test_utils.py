"""Tests for serialization and artifact writers."""

import json
import math
from unittest.mock import patch

import numpy as np
import pytest
from harvest_minimax.errors import FileSystemError
from harvest_minimax.models import Thresholds
from harvest_minimax.utils import atomic_write_text, csv_text, dumps, to_serializable, write_csv, write_json


class TestToSerializable:
    """Test conversion to JSON-ready structures."""

    def test_dataclass(self):
        """Test a dataclass becomes a dict."""
        assert to_serializable(Thresholds(S=133.0, s=176.75)) == {"S": 133.0, "s": 176.75}

    def test_numpy_values(self):
        """Test arrays and scalars become plain Python values."""
        out = to_serializable({"a": np.array([1.0, 2.0]), "b": np.int64(3), "c": (np.float64(0.5),)})
        assert out == {"a": [1.0, 2.0], "b": 3, "c": [0.5]}
        assert type(out["b"]) is int

    def test_non_finite_floats_become_strings(self):
        """Test infinities stay valid JSON."""
        assert to_serializable([math.inf, np.float64(-math.inf)]) == ["inf", "-inf"]
        json.loads(dumps({"x": math.inf}))

    def test_primitives_pass_through(self):
        assert to_serializable("text") == "text"
        assert to_serializable(None) is None


class TestWriters:
    """Test CSV and JSON output."""

    def test_csv_uses_full_precision(self):
        """Test floats print with repr."""
        text = csv_text(["x", "v"], [(0.1, 1 / 3)])
        assert text == f"x,v\n0.1,{1 / 3!r}\n"

    def test_json_is_sorted(self):
        assert dumps({"b": 1, "a": 2}).index('"a"') < dumps({"b": 1, "a": 2}).index('"b"')

    def test_atomic_write_creates_parents(self, temp_dir):
        """Test nested directories are created and no temp file remains."""
        target = temp_dir / "a" / "b" / "out.txt"
        atomic_write_text(str(target), "hello")
        assert target.read_text() == "hello"
        assert [p.name for p in target.parent.iterdir()] == ["out.txt"]

    def test_atomic_write_failure_keeps_old_file(self, temp_dir):
        """Test a failed rename leaves the previous content and no temp file."""
        target = temp_dir / "out.txt"
        target.write_text("old")
        with patch("harvest_minimax.utils.os.replace", side_effect=OSError("disk full")):
            with pytest.raises(FileSystemError):
                atomic_write_text(str(target), "new")
        assert target.read_text() == "old"
        assert [p.name for p in temp_dir.iterdir()] == ["out.txt"]

    def test_rewrites_are_byte_identical(self, temp_dir):
        """Test identical content gives identical bytes."""
        a = write_json(str(temp_dir / "a.json"), {"v": [0.1, 2.5e8]})
        b = write_json(str(temp_dir / "b.json"), {"v": [0.1, 2.5e8]})
        assert open(a, "rb").read() == open(b, "rb").read()
        c = write_csv(str(temp_dir / "c.csv"), ["x"], [[1.5]])
        assert open(c).read() == "x\n1.5\n"
