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

#include "dodge/policy.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace dodge {

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'O', 'D', 'G', 'E', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back((v >> (8 * i)) & 0xFF);
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const PolicyParams& params) {
  std::vector<unsigned char> buf(kMagic.begin(), kMagic.end());
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(params.actor_dim()));
  put_u32(buf, static_cast<std::uint32_t>(params.critic_dim()));
  put_u32(buf, static_cast<std::uint32_t>(params.action_dim()));
  put_u32(buf, static_cast<std::uint32_t>(kHiddenUnits));
  params.for_each_block([&](const Real* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const float f = static_cast<float>(p[i]);
      put_u32(buf, std::bit_cast<std::uint32_t>(f));
    }
  });
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw RuntimeFault("cannot write checkpoint '" + path + "'");
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size()));
  if (!os) throw RuntimeFault("failed writing checkpoint '" + path + "'");
}

PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint '" + path + "'");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)),
                                 std::istreambuf_iterator<char>());
  constexpr std::size_t kHeader = 8 + 5 * 4;
  if (buf.size() < kHeader ||
      std::memcmp(buf.data(), kMagic.data(), kMagic.size()) != 0) {
    throw ConfigError("'" + path + "' is not a checkpoint file");
  }
  const unsigned char* p = buf.data() + 8;
  if (get_u32(p) != kVersion) {
    throw ConfigError("unsupported checkpoint version in '" + path + "'");
  }
  const int actor_dim = static_cast<int>(get_u32(p + 4));
  const int critic_dim = static_cast<int>(get_u32(p + 8));
  const int action_dim = static_cast<int>(get_u32(p + 12));
  if (get_u32(p + 16) != static_cast<std::uint32_t>(kHiddenUnits)) {
    throw ConfigError("checkpoint hidden width does not match");
  }
  PolicyParams params(actor_dim, critic_dim, action_dim);
  if (buf.size() != kHeader + 4 * params.num_params()) {
    throw ConfigError("checkpoint '" + path + "' is truncated or corrupt");
  }
  std::size_t offset = kHeader;
  params.for_each_block([&](Real* dst, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      dst[i] = static_cast<Real>(
          std::bit_cast<float>(get_u32(buf.data() + offset)));
      offset += 4;
    }
  });
  return params;
}

}  // namespace dodge
