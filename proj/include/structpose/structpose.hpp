// Copyright 2026 The StructPose Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "structpose/checkpoint.hpp"
#include "structpose/config.hpp"
#include "structpose/data.hpp"
#include "structpose/dataset.hpp"
#include "structpose/export.hpp"
#include "structpose/hash.hpp"
#include "structpose/inference.hpp"
#include "structpose/kinematics.hpp"
#include "structpose/layers.hpp"
#include "structpose/network.hpp"
#include "structpose/pipeline.hpp"
#include "structpose/pose.hpp"
#include "structpose/report.hpp"
#include "structpose/tensor.hpp"
#include "structpose/training.hpp"
