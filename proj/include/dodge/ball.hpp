// Copyright 2026 The Dodgeskin Authors
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

#include "dodge/geom.hpp"

namespace dodge {

inline constexpr double kDefaultBallRadius = 0.15;

struct Ball {
  Vec3d position = Vec3d::Zero();
  Vec3d velocity = Vec3d::Zero();
  double radius = kDefaultBallRadius;

  Sphered sphere() const { return {position, radius}; }
};

}  // namespace dodge
