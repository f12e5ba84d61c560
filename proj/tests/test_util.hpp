// Copyright 2026 The Vitiseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VITISEG_TESTS_TEST_UTIL_HPP_
#define VITISEG_TESTS_TEST_UTIL_HPP_

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

#include "vitiseg/metrics.hpp"
#include "vitiseg/rng.hpp"
#include "vitiseg/tensor.hpp"

namespace vitiseg::testing {

/// Self-cleaning unique directory under the system temp root.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const int id = counter.fetch_add(1);
    path_ = std::filesystem::temp_directory_path() /
            ("vitiseg_test_" + std::to_string(::getpid()) + "_" + std::to_string(id));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void fill_uniform(Tensor& t, Rng& rng, Real lo = -1.0, Real hi = 1.0) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
}

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, Real lo = -1.0, Real hi = 1.0) {
  Tensor t(std::move(shape));
  fill_uniform(t, rng, lo, hi);
  return t;
}

inline BinaryMask random_binary_mask(int w, int h, Rng& rng, Real p = 0.5) {
  BinaryMask m(w, h);
  for (auto& v : m.labels) v = rng.uniform() < p ? 1 : 0;
  return m;
}

}  // namespace vitiseg::testing

#endif  // VITISEG_TESTS_TEST_UTIL_HPP_
