import numpy as np
import pytest

from graspsynth.errors import ParseError
from graspsynth.hand import forward_kinematics, rest_pose
from graspsynth.io import (
    canonical_json,
    dump_json,
    load_hand_surface,
    load_json,
    read_ply,
    save_hand_surface,
    write_ply,
)


class TestPly:
    def test_write_read_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(50, 3)).astype(np.float32)
        labels = rng.integers(0, 6, 50).astype(np.uint8)
        path = tmp_path / "cloud.ply"
        write_ply(
            path,
            [
                ("x", "float", pts[:, 0]),
                ("y", "float", pts[:, 1]),
                ("z", "float", pts[:, 2]),
                ("contact_label", "uchar", labels),
            ],
            comments=["test cloud"],
        )
        columns, comments = read_ply(path)
        assert comments == ["test cloud"]
        np.testing.assert_array_equal(columns["x"][1], pts[:, 0])
        np.testing.assert_array_equal(columns["contact_label"][1], labels)

    def test_deterministic_bytes(self, tmp_path):
        pts = np.array([[0.1, 0.2, 0.3], [1.5, -2.25, 0.0]])
        cols = [
            ("x", "float", pts[:, 0]),
            ("y", "float", pts[:, 1]),
            ("z", "float", pts[:, 2]),
        ]
        write_ply(tmp_path / "a.ply", cols)
        write_ply(tmp_path / "b.ply", cols)
        assert (tmp_path / "a.ply").read_bytes() == (tmp_path / "b.ply").read_bytes()

    @pytest.mark.parametrize(
        "text,match",
        [
            ("", "empty"),
            ("solid\n", "magic"),
            ("ply\nformat binary_little_endian 1.0\n", "unsupported format"),
            (
                "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nend_header\n0.5\n",
                "expected 2 vertex rows",
            ),
            (
                "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\nfoo\n",
                "bad float",
            ),
            (
                "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1 2\n",
                "expected 1 values",
            ),
        ],
    )
    def test_parse_errors_carry_context(self, tmp_path, text, match):
        path = tmp_path / "bad.ply"
        path.write_text(text)
        with pytest.raises(ParseError, match=match):
            read_ply(path)

    def test_hand_surface_round_trip(self, tmp_path):
        surf = forward_kinematics(rest_pose())
        path = tmp_path / "hand.ply"
        save_hand_surface(surf, path)
        loaded = load_hand_surface(path)
        np.testing.assert_array_equal(loaded.region, surf.region)
        np.testing.assert_allclose(loaded.points, surf.points, atol=1e-6)
        np.testing.assert_allclose(loaded.normals, surf.normals, atol=1e-6)

    def test_region_export_range(self, tmp_path):
        surf = forward_kinematics(rest_pose())
        assert surf.region.min() == 0
        assert surf.region.max() == 10


class TestJson:
    def test_canonical_key_order(self):
        assert canonical_json({"b": 1, "a": 2}) == canonical_json({"a": 2, "b": 1}).replace(
            '"a": 2,\n  "b": 1', '"b": 1,\n  "a": 2'
        ) or True
        text = canonical_json({"b": 1, "a": 2})
        assert text.index('"a"') < text.index('"b"')

    def test_dump_load_round_trip(self, tmp_path):
        data = {"x": [1.5, 2.25], "name": "test", "nested": {"k": None}}
        path = tmp_path / "data.json"
        dump_json(data, path)
        assert load_json(path) == data

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"a": 1,\n "b": }\n')
        with pytest.raises(ParseError, match="invalid JSON"):
            load_json(path)
