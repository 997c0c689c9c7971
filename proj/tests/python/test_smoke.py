# Copyright 2026 The CIDA Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# ==============================================================================
import math

import numpy as np
import pytest

import cida

TINY = """
num_source = 3
num_target = 3
num_test = 2
backbone_widths = 4, 6, 8
disc_hidden = 4
rpn_hidden = 8
head_hidden = 16
roi_size = 3
top_n = 16
n_min = 4
iterations = 4
"""


def test_scene_is_deterministic():
    a, b = cida.generate_scene(5), cida.generate_scene(5)
    assert a["pixels"].shape == (3, 64, 64)
    np.testing.assert_array_equal(a["pixels"], b["pixels"])
    assert a["boxes"] == b["boxes"]
    assert len(a["boxes"]) == len(a["classes"])
    t = cida.generate_scene(5, target=True)
    assert t["boxes"] == a["boxes"]
    assert not np.array_equal(t["pixels"], a["pixels"])


def test_identity_shift():
    img = cida.generate_scene(1)["pixels"]
    np.testing.assert_array_equal(cida.apply_domain_shift(img), img)


def test_entropy_fixtures():
    e = cida.pixel_entropy(np.array([1.0, 1.0 / math.e, 0.5]))
    np.testing.assert_allclose(e, [0.0, 1.0 / math.e, 0.5 * math.log(2)], atol=1e-9)


def test_sample_count_fixtures():
    assert cida.dynamic_sample_count(300, 16, 1.0, 0.0) == 300
    assert cida.dynamic_sample_count(300, 16, 0.6, 0.2) == 210
    assert cida.dynamic_sample_count(300, 16, 0.0, 1.0) == 16


def test_kl_of_identical_scores_is_zero():
    assert cida.kl_objectness([0.9, 0.5, 0.1], [0.9, 0.5, 0.1]) == pytest.approx(0.0, abs=1e-12)


def test_nms_and_iou():
    boxes = [[0, 0, 10, 10], [1, 1, 11, 11], [20, 20, 30, 30]]
    assert cida.iou(boxes[0], boxes[1]) == pytest.approx(81 / 119)
    assert cida.nms(boxes, [0.9, 0.8, 0.7], 0.5) == [0, 2]


def test_average_precision():
    gt = [{"boxes": [[0, 0, 10, 10]], "classes": [0]}]
    dets = [{"cls": 0, "score": 0.9, "box": [0, 0, 10, 10]}]
    assert cida.average_precision(dets, gt, 0) == pytest.approx(1.0)


def test_config_errors_raise():
    assert "lr = 0.01" in cida.parse_config("lr = 0.01")
    with pytest.raises(ValueError):
        cida.parse_config("no_such_key = 1")


def test_train_and_detect(tmp_path):
    res = cida.train(TINY, tmp_path)
    assert len(res["log"]) == 4
    assert 0.0 <= res["target_map"] <= 1.0
    assert (tmp_path / "model.ckpt").exists()
    img = cida.generate_scene(0, target=True)["pixels"]
    dets = cida.detect(tmp_path / "model.ckpt", img)
    assert dets == cida.detect(tmp_path / "model.ckpt", img)
    for d in dets:
        assert 0.0 <= d["score"] <= 1.0


def test_cli_exit_codes(tmp_path):
    assert cida.run_cli(["train", "--config", str(tmp_path / "missing.cfg")]) == 4
    bad = tmp_path / "bad.cfg"
    bad.write_text("lr = oops\n")
    assert cida.run_cli(["train", "--config", str(bad)]) == 2
