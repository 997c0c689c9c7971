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
"""Python access to the detector core."""

from cida._core import (
    ConfigError,
    ContractError,
    apply_domain_shift,
    average_precision,
    default_config,
    detect,
    dynamic_sample_count,
    generate_scene,
    iou,
    kl_objectness,
    nms,
    parse_config,
    pearson,
    pixel_entropy,
    run_cli,
    train,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "apply_domain_shift",
    "average_precision",
    "default_config",
    "detect",
    "dynamic_sample_count",
    "generate_scene",
    "iou",
    "kl_objectness",
    "nms",
    "parse_config",
    "pearson",
    "pixel_entropy",
    "run_cli",
    "train",
]
